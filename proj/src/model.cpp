#include "fedfuse/model.hpp"

#include <cmath>
#include <stdexcept>

namespace fedfuse::model {

namespace {

std::vector<net::StageSpec> checked_stages(const ModelConfig& cfg) {
    if (cfg.stages.empty()) {
        throw std::invalid_argument("model: at least one encoder stage is required");
    }
    if (cfg.stack == 0) {
        throw std::invalid_argument("model: the noised-copy stack must hold at least one slice");
    }
    return cfg.stages;
}

}  // namespace

DualBranchModel::DualBranchModel(const ModelConfig& config)
    : cfg(config),
      branch_a(config.patch, config.patch, config.stack * config.c_a, checked_stages(config)),
      branch_b(config.patch, config.patch, config.stack * config.c_b, config.stages),
      fuse(config.stages.back().out_channels, config.fusion_width, config.n_classes,
           config.tau) {}

template <typename ModelT, typename TensorPtr>
static std::vector<std::pair<std::string, TensorPtr>> enumerate(ModelT& m) {
    std::vector<std::pair<std::string, TensorPtr>> out;
    auto add_branch = [&](const std::string& prefix, auto& branch) {
        for (std::size_t i = 0; i < branch.stages.size(); ++i) {
            std::string stage = prefix + ".stage" + std::to_string(i);
            auto& s = branch.stages[i];
            out.emplace_back(stage + ".conv", &s.conv);
            out.emplace_back(stage + ".wq", &s.attn.wq);
            out.emplace_back(stage + ".wk", &s.attn.wk);
            out.emplace_back(stage + ".wv", &s.attn.wv);
            out.emplace_back(stage + ".wo", &s.attn.wo);
            out.emplace_back(stage + ".filter", &s.filter.w);
        }
    };
    add_branch("branch_a", m.branch_a);
    add_branch("branch_b", m.branch_b);
    out.emplace_back("fusion.cb", &m.fuse.cb);
    out.emplace_back("fusion.cd", &m.fuse.cd);
    out.emplace_back("fusion.cl", &m.fuse.cl);
    out.emplace_back("fusion.head_w", &m.fuse.head_w);
    out.emplace_back("fusion.head_b", &m.fuse.head_b);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> DualBranchModel::named_params() {
    return enumerate<DualBranchModel, Tensor*>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> DualBranchModel::named_params() const {
    return enumerate<const DualBranchModel, const Tensor*>(*this);
}

std::size_t DualBranchModel::total_elements() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params()) {
        n += t->numel();
    }
    return n;
}

DualBranchModel build_model(const ModelConfig& cfg, std::uint64_t seed) {
    DualBranchModel m(cfg);
    numkit::Rng rng(seed);
    std::size_t k = 0;
    for (auto& [name, t] : m.named_params()) {
        numkit::Rng stream = rng.fork(1, k++);
        if (name.ends_with(".filter")) {
            // Identity filter: unit real part on every frequency bin.
            for (std::size_t i = 0; i + 1 < t->numel(); i += 2) {
                (*t)[i] = 1.0f;
                (*t)[i + 1] = 0.0f;
            }
        } else if (name.ends_with(".head_b")) {
            t->fill(0.0f);
        } else {
            double fan_in = static_cast<double>(t->dim(0));
            stream.fill_normal(*t, 1.0 / std::sqrt(fan_in));
        }
    }
    return m;
}

}  // namespace fedfuse::model
