#pragma once

#include <cstddef>
#include <vector>

#include "fedfuse/tape.hpp"
#include "fedfuse/tensor.hpp"

namespace fedfuse::net {

using autodiff::Tape;
using autodiff::Var;
using numkit::Tensor;

// Multi-head self-attention weights over a model width d: the four d x d
// projections. Tokens are pixels; channels are the model dimension.
struct AttentionParams {
    std::size_t heads = 1;
    Tensor wq, wk, wv, wo;

    AttentionParams() = default;
    AttentionParams(std::size_t heads, std::size_t d);
    std::size_t width() const { return wq.empty() ? 0 : wq.dim(0); }
};

// One complex weight per frequency bin per channel, stored as
// h x w x c x 2 (re, im) floats.
struct SpectralFilterParams {
    Tensor w;

    SpectralFilterParams() = default;
    SpectralFilterParams(std::size_t h, std::size_t wd, std::size_t c);
};

// What one encoder stage is built from. The spatial dims of the filter are
// fixed by the stage's input size and downsample factor.
struct StageParams {
    std::size_t factor = 1;
    Tensor conv;  // c_in x c_out, no bias
    AttentionParams attn;
    SpectralFilterParams filter;
};

struct StageSpec {
    std::size_t factor;
    std::size_t out_channels;
    std::size_t heads;
};

// Per-branch encoder parameters; the constructor chains the stage shapes
// from the given input and rejects any inconsistency naming the stage.
struct BranchParams {
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    std::vector<StageParams> stages;

    BranchParams() = default;
    BranchParams(std::size_t h, std::size_t w, std::size_t c_in,
                 const std::vector<StageSpec>& specs);
};

// Tape bindings for one stage / one branch: the same parameters as leaves.
struct StageVars {
    std::size_t factor = 1;
    std::size_t heads = 1;
    Var conv, wq, wk, wv, wo, filter;
};

std::vector<StageVars> bind_branch(Tape& t, const BranchParams& p);

// Non-overlapping average pooling per channel (h, w must divide by factor).
Tensor downsample(const Tensor& x, std::size_t factor);

// Scaled dot-product attention over n x d tokens with per-head column
// blocks of the projections; returns n x d.
Var msa_forward(Tape& t, Var tokens, Var wq, Var wk, Var wv, Var wo, std::size_t heads);

// Frequency-domain processing of an h x w x c map.
Var fdp_forward(Tape& t, Var x, Var filter);

// Full encoder pass over a multi-scale stack: per stage, pad-to-multiple,
// downsample, 1x1 conv, MSA over pixel tokens, FDP. With improved = false
// the attention and spectral steps are skipped (the ablation encoder).
Var branch_forward(Tape& t, Var stack, const std::vector<StageVars>& stages,
                   bool improved = true);

}  // namespace fedfuse::net
