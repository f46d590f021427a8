#pragma once

#include <cstddef>
#include <vector>

#include "fedfuse/tape.hpp"
#include "fedfuse/tensor.hpp"

namespace fedfuse::fusion {

using autodiff::Tape;
using autodiff::Var;
using numkit::Shape;
using numkit::Tensor;

// Trainable weights of the cross-modal combiner and the classifier head:
// three 1x1 channel projections (gates and a shared base map), a dense
// layer over pooled features, and the hard-decision threshold.
struct FusionParams {
    Tensor cb, cd, cl;  // c_in x c_out each
    Tensor head_w;      // c_out x n_classes
    Tensor head_b;      // 1 x n_classes
    float tau = 0.5f;

    FusionParams() = default;
    FusionParams(std::size_t c_in, std::size_t c_out, std::size_t n_classes, float tau = 0.5f);
    std::size_t in_channels() const { return cb.empty() ? 0 : cb.dim(0); }
    std::size_t out_channels() const { return cb.empty() ? 0 : cb.dim(1); }
    std::size_t classes() const { return head_w.empty() ? 0 : head_w.dim(1); }
};

struct FusionVars {
    Var cb, cd, cl, head_w, head_b;
};

FusionVars bind_fusion(Tape& t, const FusionParams& p);

// The two gated combinations and their sum. Inputs are identically shaped
// h x w x c maps (or n x c token matrices); outputs match that layout with
// the projected channel count.
struct FusePair {
    Var f1, f2, fused;
};

FusePair fuse(Tape& t, Var f_hsi, Var f_lidar, const FusionVars& p);

// Pooled features -> dense layer -> softmax; accepts an h x w x c map
// (pooled internally) or an already-pooled 1 x c row. Returns 1 x N.
Var classify(Tape& t, Var feature, const FusionVars& p);

// Hard accept/reject of a prediction: 1 iff the maximum class probability
// reaches tau.
int threshold_map(const Tensor& probs, double tau);

// One batch of classifier outputs: n x N probability matrices for the
// fused features and the two single-modality readouts, plus the integer
// class targets (the one-hot rows are implied).
struct LogitsBundle {
    Var fused, hsi, lidar;
    std::vector<std::size_t> targets;
};

// Cross-entropy of the fused output against the targets (summed over the
// batch), a 1/n-scaled consistency penalty tying the single-modality
// outputs to the fused one, and lambda times the sum of the parameter L2
// norms (the norms themselves, not their squares).
Var loss(Tape& t, const LogitsBundle& b, const std::vector<Var>& reg_weights, double lambda);

}  // namespace fedfuse::fusion
