#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "fedfuse/tensor.hpp"

namespace fedfuse::autodiff {

using numkit::ComplexTensor;
using numkit::Shape;
using numkit::Tensor;

// Handle to a node on a Tape. Only meaningful together with the tape that
// produced it.
struct Var {
    std::size_t idx = 0;
};

// Reverse-mode gradient tape. Every operation appends a node holding its
// value and an adjoint closure; backward() runs the closures newest-first,
// accumulating gradients into every node. Single-threaded by design — one
// tape per training replica.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    const Tensor& val(Var v) const { return nodes_[v.idx].val; }
    const Tensor& grad(Var v) const { return nodes_[v.idx].grad; }

    // Scalar nodes produced by the reductions below keep their full
    // double-precision accumulator next to the float32 value; scalar() reads
    // it (falling back to the stored value elsewhere). Finite-difference
    // checks and loss logging want the extra digits.
    double scalar(Var v) const;

    // Inputs and parameters enter as leaves; gradients accumulate into them
    // like any other node (callers ignore the ones they do not need).
    Var leaf(Tensor value);

    // --- elementwise and scalar-weighted ---
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var sigmoid(Var a);

    // --- 2-D linear algebra ---
    Var matmul(Var a, Var b);     // [m x k] . [k x n]
    Var matmul_nt(Var a, Var b);  // a . b^T with b [n x k]
    Var softmax_rows(Var a);
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);
    Var concat_cols(const std::vector<Var>& parts);
    Var concat_rows(const std::vector<Var>& parts);
    Var add_rowvec(Var m, Var v);  // broadcast a [1 x n] row over [m x n]

    // --- shape plumbing (data order unchanged) ---
    Var reshape(Var a, Shape shape);

    // --- spatial ops on h x w x c maps ---
    Var avgpool(Var a, std::size_t factor);
    // Mirror-without-duplicate padding on the bottom/right edges, just enough
    // to make both spatial dims divisible by `factor`.
    Var reflect_pad_to_multiple(Var a, std::size_t factor);
    Var global_avg_pool(Var a);  // h x w x c -> 1 x c

    // Frequency-domain filtering: per channel, real(ifft2(w ⊙ fft2(x))).
    // The filter is a real tensor h x w x c x 2 holding (re, im) per bin.
    Var spectral_filter(Var x, Var w);

    // --- reductions to scalars (shape {1}) ---
    Var sum(Var a);
    Var sum_squares(Var a);
    Var l2norm(Var a);
    Var add_many(const std::vector<Var>& scalars);
    // Cross-entropy against integer targets, summed over the batch; probs
    // are clamped at 1e-12 inside the log.
    Var ce_onehot_sum(Var probs, const std::vector<std::size_t>& targets);

    // Seeds the root gradient with 1 and sweeps the tape in reverse. The
    // root must be a scalar. May be called once per tape.
    void backward(Var root);

private:
    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Tape&)> back;
        std::optional<double> hi;  // double-precision twin for scalar reductions
    };

    Var push(Tensor value, std::function<void(Tape&)> back);
    Tensor& grad_mut(Var v) { return nodes_[v.idx].grad; }

    // Deque, not vector: val()/grad() references stay valid while later
    // operations are pushed, which forward passes rely on.
    std::deque<Node> nodes_;
    bool swept_ = false;
};

}  // namespace fedfuse::autodiff
