#pragma once

#include <vector>

#include "fedfuse/tensor.hpp"

namespace fedfuse::diffusion {

using numkit::Rng;
using numkit::Tensor;

// Forward-process tables, all in double. Index 0 is the conventional
// sentinel (alpha_bar[0] = 1) so t in 1..T addresses directly; beta[0],
// alpha[0] and sigma2[0] are unused.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;      // 1 - beta[t]
    std::vector<double> alpha_bar;  // running product of alpha
    std::vector<double> sigma2;     // reverse-step posterior variance
};

// Timesteps whose noised copies feed the branch encoders by default.
inline const std::vector<int> kDefaultTimesteps = {0, 50, 100, 300, 500, 700, 900};

// Linear beta interpolation from beta_start to beta_end over T steps.
NoiseSchedule build_schedule(int T, double beta_start, double beta_end);

// One forward step: sqrt(alpha_t) * x_prev + sqrt(1 - alpha_t) * eps.
Tensor q_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& s);

// Closed-form jump to step t: sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps;
// t = 0 returns x0 unchanged.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s);

// Reverse transition mean plus sigma_t * noise; deterministic at t = 1
// where the posterior variance vanishes.
Tensor posterior_step(const Tensor& x_t, const Tensor& eps_pred, int t, const NoiseSchedule& s,
                      const Tensor& noise);

// Channel-axis concatenation of q_sample at each listed timestep, with
// independent noise per timestep drawn from `rng` in list order. The list
// must be ascending, start at 0, and stay within [0, T]; the timestep-0
// block is the input itself, bit for bit.
Tensor multiscale_stack(const Tensor& x0, const std::vector<int>& timesteps,
                        const NoiseSchedule& s, Rng& rng);

}  // namespace fedfuse::diffusion
