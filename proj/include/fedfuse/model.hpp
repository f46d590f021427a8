#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedfuse/fusion.hpp"
#include "fedfuse/net.hpp"
#include "fedfuse/tensor.hpp"

namespace fedfuse::model {

using numkit::Tensor;

// Which raw inputs the model consumes. Single-modality variants feed one
// branch's features to both fusion arms (the ablation configurations).
enum class Modality { kFused, kAOnly, kBOnly };

struct ModelConfig {
    std::size_t patch = 8;  // square input window
    std::size_t c_a = 8, c_b = 1;
    std::size_t stack = 7;  // noised copies concatenated per modality
    std::vector<net::StageSpec> stages = {{2, 32, 4}, {2, 64, 8}};
    std::size_t fusion_width = 64;
    std::size_t n_classes = 6;
    float tau = 0.5f;
    bool improved = true;  // attention + spectral steps on
    Modality modality = Modality::kFused;
};

// Both branch encoders plus the fusion/classifier weights, with a fixed
// enumeration order so optimizers, checkpoints, reductions, and divergence
// reports all address parameters by the same names.
struct DualBranchModel {
    ModelConfig cfg;
    net::BranchParams branch_a, branch_b;
    fusion::FusionParams fuse;

    DualBranchModel() = default;
    explicit DualBranchModel(const ModelConfig& cfg);

    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<std::pair<std::string, const Tensor*>> named_params() const;
    std::size_t total_elements() const;
};

// Deterministic seeded initialization: projections draw 1/sqrt(fan-in)
// normals, spectral filters start as the identity filter, biases at zero.
DualBranchModel build_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace fedfuse::model
