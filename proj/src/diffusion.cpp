#include "fedfuse/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedfuse::diffusion {

namespace {

void require_step(int t, int lo, const NoiseSchedule& s, const char* who) {
    if (t < lo || t > s.T) {
        throw std::invalid_argument(std::string(who) + ": timestep " + std::to_string(t) +
                                    " outside [" + std::to_string(lo) + ", " +
                                    std::to_string(s.T) + "]");
    }
}

void require_match(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(who) + ": shapes disagree, " +
                                    numkit::shape_str(a.shape()) + " vs " +
                                    numkit::shape_str(b.shape()));
    }
}

}  // namespace

NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.sigma2.assign(static_cast<std::size_t>(T) + 1, 0.0);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        s.beta[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha[t] = 1.0 - s.beta[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
        s.sigma2[t] = (1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * (1.0 - s.alpha[t]);
    }
    return s;
}

Tensor q_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& s) {
    require_step(t, 1, s, "q_step");
    require_match(x_prev, eps, "q_step");
    const double a = std::sqrt(s.alpha[t]);
    const double b = std::sqrt(1.0 - s.alpha[t]);
    Tensor out(x_prev.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = static_cast<float>(a * x_prev[i] + b * eps[i]);
    }
    return out;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& s) {
    require_step(t, 0, s, "q_sample");
    require_match(x0, eps, "q_sample");
    if (t == 0) return x0;
    const double a = std::sqrt(s.alpha_bar[t]);
    const double b = std::sqrt(1.0 - s.alpha_bar[t]);
    Tensor out(x0.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = static_cast<float>(a * x0[i] + b * eps[i]);
    }
    return out;
}

Tensor posterior_step(const Tensor& x_t, const Tensor& eps_pred, int t, const NoiseSchedule& s,
                      const Tensor& noise) {
    require_step(t, 1, s, "posterior_step");
    require_match(x_t, eps_pred, "posterior_step");
    require_match(x_t, noise, "posterior_step");
    const double eps_coef = (1.0 - s.alpha[t]) / std::sqrt(1.0 - s.alpha_bar[t]);
    const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha[t]);
    const double sigma = std::sqrt(s.sigma2[t]);
    Tensor out(x_t.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double mu = (x_t[i] - eps_coef * eps_pred[i]) * inv_sqrt_a;
        out[i] = static_cast<float>(mu + sigma * noise[i]);
    }
    return out;
}

Tensor multiscale_stack(const Tensor& x0, const std::vector<int>& timesteps,
                        const NoiseSchedule& s, Rng& rng) {
    if (x0.rank() != 3) {
        throw std::invalid_argument("multiscale_stack: expected h x w x c input, got " +
                                    numkit::shape_str(x0.shape()));
    }
    if (timesteps.empty() || timesteps.front() != 0) {
        throw std::invalid_argument("multiscale_stack: timestep list must start at 0");
    }
    if (!std::is_sorted(timesteps.begin(), timesteps.end())) {
        throw std::invalid_argument("multiscale_stack: timestep list must be ascending");
    }
    if (timesteps.back() > s.T) {
        throw std::invalid_argument("multiscale_stack: timestep " +
                                    std::to_string(timesteps.back()) + " exceeds T = " +
                                    std::to_string(s.T));
    }
    const std::size_t h = x0.dim(0), w = x0.dim(1), c = x0.dim(2);
    const std::size_t k = timesteps.size();
    Tensor out({h, w, c * k});
    Tensor eps(x0.shape());
    for (std::size_t ti = 0; ti < k; ++ti) {
        const Tensor* slice = &x0;
        Tensor noised;
        if (timesteps[ti] != 0) {
            rng.fill_normal(eps);
            noised = q_sample(x0, timesteps[ti], eps, s);
            slice = &noised;
        }
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    out.at(i, j, ti * c + ch) = slice->at(i, j, ch);
                }
            }
        }
    }
    return out;
}

}  // namespace fedfuse::diffusion
