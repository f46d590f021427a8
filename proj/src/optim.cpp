#include "fedfuse/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedfuse::optim {

namespace {

void validate(const OptimizerConfig& cfg) {
    if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) {
        throw std::invalid_argument("optimizer: learning rate must be finite and nonnegative");
    }
    if (!(cfg.gamma > 0.0) || cfg.gamma > 1.0) {
        throw std::invalid_argument("optimizer: decay factor must lie in (0, 1]");
    }
    if (cfg.decay_epochs == 0) {
        throw std::invalid_argument("optimizer: decay interval must be at least one epoch");
    }
    if (!(cfg.beta1 >= 0.0) || cfg.beta1 >= 1.0 || !(cfg.beta2 >= 0.0) || cfg.beta2 >= 1.0) {
        throw std::invalid_argument("optimizer: moment factors must lie in [0, 1)");
    }
    if (!(cfg.eps > 0.0)) {
        throw std::invalid_argument("optimizer: eps must be positive");
    }
}

}  // namespace

double decayed_lr(const OptimizerConfig& cfg, std::size_t epoch) {
    return cfg.lr * std::pow(cfg.gamma, static_cast<double>(epoch / cfg.decay_epochs));
}

Optimizer::Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) { validate(cfg); }

void Optimizer::apply(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
                      std::size_t epoch) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("optimizer: parameter and gradient lists differ in length");
    }
    double lr = decayed_lr(cfg_, epoch);
    if (cfg_.kind == OptKind::kSgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor& w = *params[i];
            const Tensor& g = grads[i];
            if (!w.same_shape(g)) {
                throw std::invalid_argument("optimizer: gradient shape mismatch at parameter " +
                                            std::to_string(i));
            }
            for (std::size_t j = 0; j < w.numel(); ++j) {
                w[j] = static_cast<float>(static_cast<double>(w[j]) -
                                          lr * static_cast<double>(g[j]));
            }
        }
        return;
    }
    if (m_.empty()) {
        for (const Tensor& g : grads) {
            m_.push_back(Tensor::zeros(g.shape()));
            v_.push_back(Tensor::zeros(g.shape()));
        }
    }
    if (m_.size() != params.size()) {
        throw std::invalid_argument("optimizer: parameter list changed size between steps");
    }
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& w = *params[i];
        const Tensor& g = grads[i];
        if (!w.same_shape(g)) {
            throw std::invalid_argument("optimizer: gradient shape mismatch at parameter " +
                                        std::to_string(i));
        }
        for (std::size_t j = 0; j < w.numel(); ++j) {
            double gd = g[j];
            double m = cfg_.beta1 * static_cast<double>(m_[i][j]) + (1.0 - cfg_.beta1) * gd;
            double v = cfg_.beta2 * static_cast<double>(v_[i][j]) + (1.0 - cfg_.beta2) * gd * gd;
            m_[i][j] = static_cast<float>(m);
            v_[i][j] = static_cast<float>(v);
            double update = lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
            w[j] = static_cast<float>(static_cast<double>(w[j]) - update);
        }
    }
}

}  // namespace fedfuse::optim
