#pragma once

#include <cstddef>
#include <vector>

#include "fedfuse/tensor.hpp"

namespace fedfuse::optim {

using numkit::Tensor;

enum class OptKind { kSgd, kAdam };

struct OptimizerConfig {
    OptKind kind = OptKind::kSgd;
    double lr = 0.001;
    double gamma = 0.5;             // step-decay factor
    std::size_t decay_epochs = 60;  // epochs between decays
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// lr * gamma^(epoch / decay_epochs), the step-decay schedule.
double decayed_lr(const OptimizerConfig& cfg, std::size_t epoch);

// Applies one update step to a parameter list from a structurally matching
// gradient list. SGD is the exact w - lr * g rule; Adam keeps float32
// moment buffers keyed by parameter position and shares one step counter.
class Optimizer {
public:
    explicit Optimizer(const OptimizerConfig& cfg);

    void apply(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               std::size_t epoch);

    const OptimizerConfig& config() const { return cfg_; }

private:
    OptimizerConfig cfg_;
    std::vector<Tensor> m_, v_;
    std::size_t step_ = 0;
};

}  // namespace fedfuse::optim
