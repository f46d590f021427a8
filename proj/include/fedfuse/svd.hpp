#pragma once

#include "fedfuse/tensor.hpp"

namespace fedfuse::numkit {

// Thin SVD of a P x Q matrix: a = u * diag(s) * v^T with r = min(P, Q),
// u is P x r, s is length r (descending), v is Q x r.
struct SvdResult {
    Tensor u;
    Tensor s;
    Tensor v;
};

// One-sided Jacobi in double precision. Throws std::runtime_error if the
// rotations have not died down after the sweep cap (pathological input).
SvdResult svd(const Tensor& a);

}  // namespace fedfuse::numkit
