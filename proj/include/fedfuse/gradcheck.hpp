#pragma once

#include <functional>

#include "fedfuse/tensor.hpp"

namespace fedfuse::autodiff {

// Central-difference audit of an analytic gradient. `f` must be a pure
// scalar function of x (typically a fresh tape per call); eps must lie in
// [1e-4, 1e-2]. Returns the max over coordinates of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<double(const numkit::Tensor&)>& f,
                  const numkit::Tensor& x, const numkit::Tensor& analytic, double eps);

}  // namespace fedfuse::autodiff
