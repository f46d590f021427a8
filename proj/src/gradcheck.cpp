#include "fedfuse/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace fedfuse::autodiff {

double grad_check(const std::function<double(const numkit::Tensor&)>& f,
                  const numkit::Tensor& x, const numkit::Tensor& analytic, double eps) {
    if (eps < 1e-4 || eps > 1e-2) {
        throw std::invalid_argument("grad_check: eps must lie in [1e-4, 1e-2]");
    }
    if (!analytic.same_shape(x)) {
        throw std::invalid_argument("grad_check: gradient shape does not match input");
    }
    if (!std::isfinite(f(x))) {
        throw std::invalid_argument("grad_check: f(x) is not finite");
    }
    numkit::Tensor probe = x;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const float base = x[i];
        const float hi = static_cast<float>(static_cast<double>(base) + eps);
        const float lo = static_cast<float>(static_cast<double>(base) - eps);
        probe[i] = hi;
        const double f_hi = f(probe);
        probe[i] = lo;
        const double f_lo = f(probe);
        probe[i] = base;
        // The perturbations round in float32, so divide by the step that was
        // actually applied rather than 2*eps.
        const double step = static_cast<double>(hi) - static_cast<double>(lo);
        const double numeric = (f_hi - f_lo) / step;
        const double an = analytic[i];
        const double err =
            std::abs(an - numeric) / std::max({std::abs(an), std::abs(numeric), 1e-8});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace fedfuse::autodiff
