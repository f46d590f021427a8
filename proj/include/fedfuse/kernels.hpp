#pragma once

#include "fedfuse/tensor.hpp"

namespace fedfuse::numkit {

// Matrix products on 2-D tensors. Inner sums accumulate in double.
Tensor matmul(const Tensor& a, const Tensor& b);     // [m x k] . [k x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a . b^T, b is [n x k]
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a^T . b, a is [k x m]

// Row-wise softmax with max-subtraction stabilization. Rejects NaN input.
Tensor softmax_rows(const Tensor& x);

Tensor transpose2d(const Tensor& x);

}  // namespace fedfuse::numkit
