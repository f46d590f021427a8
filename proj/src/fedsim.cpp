#include "fedfuse/fedsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <stdexcept>
#include <utility>

#include "fedfuse/fusion.hpp"
#include "fedfuse/net.hpp"
#include "fedfuse/tape.hpp"

namespace fedfuse::fedsim {

// ---------- byte accounting ----------

void Ledger::add(std::size_t round, std::size_t sender, std::size_t receiver,
                 const std::string& kind, std::size_t elements) {
    if (kind != "feature" && kind != "feature_lowrank" && kind != "gradient") {
        throw std::invalid_argument("ledger: unknown payload kind '" + kind + "'");
    }
    entries_.push_back({round, sender, receiver, kind, elements, 4 * elements});
}

std::size_t Ledger::total_bytes() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        n += e.bytes;
    }
    return n;
}

std::size_t Ledger::feature_bytes() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.kind != "gradient") {
            n += e.bytes;
        }
    }
    return n;
}

std::size_t Ledger::gradient_bytes() const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.kind == "gradient") {
            n += e.bytes;
        }
    }
    return n;
}

std::size_t Ledger::round_feature_bytes(std::size_t round) const {
    std::size_t n = 0;
    for (const auto& e : entries_) {
        if (e.round == round && e.kind != "gradient") {
            n += e.bytes;
        }
    }
    return n;
}

std::string Ledger::to_text() const {
    std::string out;
    char line[160];
    for (const auto& e : entries_) {
        std::snprintf(line, sizeof(line), "%zu %zu %zu %s %zu %zu\n", e.round, e.sender,
                      e.receiver, e.kind.c_str(), e.elements, e.bytes);
        out += line;
    }
    return out;
}

double mib_truncated(std::size_t bytes) {
    double mib = static_cast<double>(bytes) / (1024.0 * 1024.0);
    return std::floor(mib * 1000.0) / 1000.0;
}

std::string format_mib(std::size_t bytes) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", mib_truncated(bytes));
    return buf;
}

// ---------- training data ----------

namespace {

constexpr std::uint64_t kSplitSalt = 0x5eedf00d2026ull;
constexpr std::uint64_t kShardSalt = 0x51a2de5700bull;

}  // namespace

TrainingData build_training_data(const dataio::SceneDataset& ds, const DataConfig& cfg) {
    if (cfg.n_shards == 0) {
        throw std::invalid_argument("training data: at least one shard is required");
    }
    std::vector<dataio::PatchSample> patches = dataio::extract_patches(ds, cfg.window);
    if (patches.empty()) {
        throw std::invalid_argument("training data: the scene has no labeled pixels");
    }
    TrainingData d;
    d.n_classes = ds.n_classes;
    d.schedule = diffusion::build_schedule(cfg.schedule_steps, cfg.beta_min, cfg.beta_max);
    d.timesteps = cfg.timesteps;

    dataio::SplitIndices split =
        dataio::split_train_val(patches.size(), numkit::Rng::mix64(cfg.seed ^ kSplitSalt));
    d.train = split.train;
    d.val = split.val;

    std::vector<const Tensor*> train_a, train_b;
    train_a.reserve(d.train.size());
    train_b.reserve(d.train.size());
    for (std::size_t i : d.train) {
        train_a.push_back(&patches[i].a);
        train_b.push_back(&patches[i].b);
    }
    d.stats_a = dataio::channel_stats(train_a);
    d.stats_b = dataio::channel_stats(train_b);

    d.samples.reserve(patches.size());
    for (auto& p : patches) {
        SamplePatch s;
        s.a = std::move(p.a);
        s.b = std::move(p.b);
        dataio::standardize(s.a, d.stats_a);
        dataio::standardize(s.b, d.stats_b);
        s.label = p.label;
        s.row = p.row;
        s.col = p.col;
        d.samples.push_back(std::move(s));
    }

    std::vector<std::size_t> train_labels(d.train.size());
    for (std::size_t i = 0; i < d.train.size(); ++i) {
        train_labels[i] = d.samples[d.train[i]].label;
    }
    std::vector<std::vector<std::size_t>> parts = dataio::partition_noniid(
        train_labels, cfg.n_shards, cfg.alpha, numkit::Rng::mix64(cfg.seed ^ kShardSalt));
    d.shards.resize(parts.size());
    for (std::size_t s = 0; s < parts.size(); ++s) {
        d.shards[s].reserve(parts[s].size());
        for (std::size_t pos : parts[s]) {
            d.shards[s].push_back(d.train[pos]);
        }
    }
    return d;
}

Tensor stack_input(const TrainingData& d, std::uint64_t seed, std::size_t sample, int modality,
                   std::size_t epoch_key) {
    if (sample >= d.samples.size()) {
        throw std::invalid_argument("stack: sample index out of range");
    }
    if (modality != 0 && modality != 1) {
        throw std::invalid_argument("stack: modality must be 0 or 1");
    }
    const Tensor& x0 = modality == 0 ? d.samples[sample].a : d.samples[sample].b;
    numkit::Rng noise = numkit::Rng(seed).fork(7 + static_cast<std::uint64_t>(modality),
                                               epoch_key, sample);
    return diffusion::multiscale_stack(x0, d.timesteps, d.schedule, noise);
}

std::vector<std::size_t> batch_indices(const TrainingData& d, std::uint64_t seed,
                                       std::size_t shard, std::size_t epoch,
                                       std::size_t round_in_epoch, std::size_t batch) {
    if (shard >= d.shards.size()) {
        throw std::invalid_argument("batch: shard index out of range");
    }
    if (batch == 0) {
        throw std::invalid_argument("batch: batch size must be at least 1");
    }
    std::vector<std::size_t> order = d.shards[shard];
    if (order.empty()) {
        throw std::invalid_argument("batch: shard is empty");
    }
    numkit::Rng rng = numkit::Rng(seed).fork(5, shard, epoch);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = rng.below(i);
        std::swap(order[i - 1], order[j]);
    }
    std::size_t n = order.size();
    std::size_t b = std::min(batch, n);
    std::size_t start = (round_in_epoch * b) % n;
    std::vector<std::size_t> out(b);
    for (std::size_t i = 0; i < b; ++i) {
        out[i] = order[(start + i) % n];
    }
    return out;
}

// ---------- collectives ----------

GradientSet mean_gradients(const std::vector<GradientSet>& per_client) {
    if (per_client.empty()) {
        throw std::invalid_argument("allreduce: no gradient sets");
    }
    const GradientSet& first = per_client.front();
    for (const GradientSet& g : per_client) {
        if (g.size() != first.size()) {
            throw std::invalid_argument("allreduce: gradient sets differ in length");
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!g[i].same_shape(first[i])) {
                throw std::invalid_argument(
                    "allreduce: gradient shape mismatch at parameter " + std::to_string(i));
            }
        }
    }
    double inv = 1.0 / static_cast<double>(per_client.size());
    GradientSet mean;
    mean.reserve(first.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        Tensor t(first[i].shape());
        for (std::size_t j = 0; j < t.numel(); ++j) {
            double acc = 0.0;  // fixed ascending client order
            for (const GradientSet& g : per_client) {
                acc += static_cast<double>(g[i][j]);
            }
            t[j] = static_cast<float>(acc * inv);
        }
        mean.push_back(std::move(t));
    }
    return mean;
}

// ---------- shared per-client computation ----------

namespace {

using autodiff::Tape;
using autodiff::Var;

struct BoundLeaves {
    std::vector<net::StageVars> a, b;
    fusion::FusionVars fu;
    std::vector<Var> ordered;  // same order as DualBranchModel::named_params
};

BoundLeaves bind_model(Tape& t, const model::DualBranchModel& m) {
    BoundLeaves bl;
    bl.a = net::bind_branch(t, m.branch_a);
    bl.b = net::bind_branch(t, m.branch_b);
    bl.fu = fusion::bind_fusion(t, m.fuse);
    for (const auto* stages : {&bl.a, &bl.b}) {
        for (const net::StageVars& s : *stages) {
            bl.ordered.push_back(s.conv);
            bl.ordered.push_back(s.wq);
            bl.ordered.push_back(s.wk);
            bl.ordered.push_back(s.wv);
            bl.ordered.push_back(s.wo);
            bl.ordered.push_back(s.filter);
        }
    }
    bl.ordered.push_back(bl.fu.cb);
    bl.ordered.push_back(bl.fu.cd);
    bl.ordered.push_back(bl.fu.cl);
    bl.ordered.push_back(bl.fu.head_w);
    bl.ordered.push_back(bl.fu.head_b);
    return bl;
}

// One client's (or one joint step's) tape over a batch.
struct ClientStep {
    Tape tape;
    BoundLeaves bound;
    std::vector<Var> feats_a, feats_b;  // live per-sample features
    std::vector<std::size_t> batch;
};

void forward_own(ClientStep& cs, const model::DualBranchModel& m, const TrainingData& d,
                 std::uint64_t seed, std::size_t epoch_key, bool live_a, bool live_b) {
    cs.bound = bind_model(cs.tape, m);
    for (std::size_t s : cs.batch) {
        if (live_a) {
            Tensor x = stack_input(d, seed, s, 0, epoch_key);
            cs.feats_a.push_back(net::branch_forward(cs.tape, cs.tape.leaf(std::move(x)),
                                                     cs.bound.a, m.cfg.improved));
        }
        if (live_b) {
            Tensor x = stack_input(d, seed, s, 1, epoch_key);
            cs.feats_b.push_back(net::branch_forward(cs.tape, cs.tape.leaf(std::move(x)),
                                                     cs.bound.b, m.cfg.improved));
        }
    }
}

// Batch feature matrix: per-sample h x w x c maps stacked into (B*h*w) x c.
Tensor flatten_features(const Tape& t, const std::vector<Var>& feats) {
    const Tensor& f0 = t.val(feats.front());
    std::size_t rows = f0.dim(0) * f0.dim(1);
    std::size_t c = f0.dim(2);
    Tensor m({feats.size() * rows, c});
    float* dst = m.data();
    for (Var v : feats) {
        const Tensor& f = t.val(v);
        std::copy(f.data(), f.data() + f.numel(), dst);
        dst += f.numel();
    }
    return m;
}

Tensor sample_rows(const Tensor& matrix, std::size_t i, std::size_t h, std::size_t w) {
    std::size_t c = matrix.dim(1);
    Tensor out({h, w, c});
    const float* src = matrix.data() + i * h * w * c;
    std::copy(src, src + h * w * c, out.data());
    return out;
}

double finish_step(ClientStep& cs, const model::DualBranchModel& m, const TrainingData& d,
                   const Tensor* other_a, const Tensor* other_b, double lambda,
                   GradientSet& grads) {
    Tape& t = cs.tape;
    model::Modality mode = m.cfg.modality;
    std::size_t B = cs.batch.size();
    std::size_t h = 0, w = 0;
    if (!cs.feats_a.empty()) {
        h = t.val(cs.feats_a.front()).dim(0);
        w = t.val(cs.feats_a.front()).dim(1);
    } else if (!cs.feats_b.empty()) {
        h = t.val(cs.feats_b.front()).dim(0);
        w = t.val(cs.feats_b.front()).dim(1);
    }
    std::vector<Var> of_rows, o1_rows, o2_rows;
    std::vector<std::size_t> targets;
    of_rows.reserve(B);
    o1_rows.reserve(B);
    o2_rows.reserve(B);
    targets.reserve(B);
    for (std::size_t i = 0; i < B; ++i) {
        Var fa, fb;
        if (mode == model::Modality::kAOnly) {
            fa = cs.feats_a[i];
            fb = fa;
        } else if (mode == model::Modality::kBOnly) {
            fb = cs.feats_b[i];
            fa = fb;
        } else {
            if (!cs.feats_a.empty()) {
                fa = cs.feats_a[i];
            } else {
                if (other_a == nullptr) {
                    throw std::runtime_error("federation: missing received modality-A features");
                }
                fa = t.leaf(sample_rows(*other_a, i, h, w));
            }
            if (!cs.feats_b.empty()) {
                fb = cs.feats_b[i];
            } else {
                if (other_b == nullptr) {
                    throw std::runtime_error("federation: missing received modality-B features");
                }
                fb = t.leaf(sample_rows(*other_b, i, h, w));
            }
        }
        fusion::FusePair fp = fusion::fuse(t, fa, fb, cs.bound.fu);
        of_rows.push_back(fusion::classify(t, fp.fused, cs.bound.fu));
        o1_rows.push_back(fusion::classify(t, fa, cs.bound.fu));
        o2_rows.push_back(fusion::classify(t, fb, cs.bound.fu));
        targets.push_back(d.samples[cs.batch[i]].label - 1);
    }
    fusion::LogitsBundle bundle{t.concat_rows(of_rows), t.concat_rows(o1_rows),
                                t.concat_rows(o2_rows), targets};
    Var total = fusion::loss(t, bundle, cs.bound.ordered, lambda);
    double value = t.scalar(total);
    t.backward(total);
    grads.clear();
    grads.reserve(cs.bound.ordered.size());
    for (Var v : cs.bound.ordered) {
        grads.push_back(t.grad(v));
    }
    return value;
}

void check_loss(double value, std::size_t round, std::size_t client) {
    if (!std::isfinite(value)) {
        throw std::runtime_error("round " + std::to_string(round) +
                                 ": training loss is NaN or infinite on client " +
                                 std::to_string(client));
    }
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void validate_train_config(const TrainConfig& cfg, const TrainingData& data,
                           const model::DualBranchModel& m) {
    if (cfg.n_clients == 0 || (cfg.n_clients > 1 && cfg.n_clients % 2 != 0)) {
        throw std::invalid_argument("federation: the client count must be 1 or even");
    }
    if (cfg.interval == 0) {
        throw std::invalid_argument("federation: the exchange interval must be at least 1");
    }
    if (cfg.batch == 0) {
        throw std::invalid_argument("federation: the batch size must be at least 1");
    }
    if (cfg.lambda < 0.0) {
        throw std::invalid_argument("federation: lambda must be nonnegative");
    }
    std::size_t pairs = cfg.n_clients == 1 ? 1 : cfg.n_clients / 2;
    if (data.shards.size() != pairs) {
        throw std::invalid_argument("federation: expected " + std::to_string(pairs) +
                                    " data shards, got " + std::to_string(data.shards.size()));
    }
    for (const auto& s : data.shards) {
        if (s.empty()) {
            throw std::invalid_argument("federation: a data shard is empty");
        }
    }
    if (cfg.n_clients > 1 && m.cfg.modality != model::Modality::kFused) {
        throw std::invalid_argument(
            "federation: single-modality models train with one client only");
    }
}

std::size_t max_shard_size(const TrainingData& d) {
    std::size_t n = 0;
    for (const auto& s : d.shards) {
        n = std::max(n, s.size());
    }
    return n;
}

}  // namespace

// ---------- the federation ----------

struct Federation::Client {
    std::size_t id = 0;
    int modality = -1;  // 0 = A, 1 = B, -1 = both
    std::size_t shard = 0;
    model::DualBranchModel model;
    optim::Optimizer opt;
    std::map<std::size_t, Tensor> received;

    Client(const model::DualBranchModel& m, const optim::OptimizerConfig& oc)
        : model(m), opt(oc) {}
};

Federation::Federation(const model::DualBranchModel& init, const TrainingData& data,
                       const TrainConfig& cfg)
    : data_(&data), cfg_(cfg) {
    validate_train_config(cfg, data, init);
    for (std::size_t c = 0; c < cfg.n_clients; ++c) {
        auto client = std::make_unique<Client>(init, cfg.opt);
        client->id = c;
        client->modality = cfg.n_clients == 1 ? -1 : static_cast<int>(c % 2);
        client->shard = cfg.n_clients == 1 ? 0 : c / 2;
        clients_.push_back(std::move(client));
    }
}

Federation::~Federation() = default;

std::size_t Federation::clients() const { return clients_.size(); }

std::size_t Federation::rounds_per_epoch() const {
    return std::max<std::size_t>(1, ceil_div(max_shard_size(*data_), cfg_.batch));
}

const model::DualBranchModel& Federation::replica(std::size_t client) const {
    return clients_.at(client)->model;
}

model::DualBranchModel& Federation::replica(std::size_t client) {
    return clients_.at(client)->model;
}

double Federation::run_round(std::size_t epoch, std::size_t round_in_epoch) {
    std::size_t n = clients_.size();
    std::deque<ClientStep> steps;
    for (std::size_t c = 0; c < n; ++c) {
        Client& cl = *clients_[c];
        steps.emplace_back();
        ClientStep& cs = steps.back();
        cs.batch = batch_indices(*data_, cfg_.seed, cl.shard, epoch, round_in_epoch, cfg_.batch);
        forward_own(cs, cl.model, *data_, cfg_.seed, epoch + 1, cl.modality != 1,
                    cl.modality != 0);
    }

    if (n > 1 && round_ % cfg_.interval == 0) {
        for (std::size_t s = 0; s < n; ++s) {
            const Client& sender = *clients_[s];
            const std::vector<Var>& own =
                sender.modality == 0 ? steps[s].feats_a : steps[s].feats_b;
            Tensor matrix = flatten_features(steps[s].tape, own);
            codec::EncodedFeature enc = codec::svd_encode(matrix, cfg_.codec);
            Tensor decoded = codec::svd_decode(enc);
            for (std::size_t r = 0; r < n; ++r) {
                if (r == s) {
                    continue;
                }
                ledger_.add(round_, s, r, enc.kind(), enc.element_count());
                clients_[r]->received[s] = decoded;
            }
        }
    }

    std::vector<GradientSet> sets(n);
    double loss_sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        Client& cl = *clients_[c];
        const Tensor* other_a = nullptr;
        const Tensor* other_b = nullptr;
        if (n > 1) {
            std::size_t partner = c ^ 1;
            auto it = cl.received.find(partner);
            if (it == cl.received.end()) {
                throw std::runtime_error("round " + std::to_string(round_) + ": client " +
                                         std::to_string(c) + " has no features from client " +
                                         std::to_string(partner));
            }
            (cl.modality == 0 ? other_b : other_a) = &it->second;
        }
        double value =
            finish_step(steps[c], cl.model, *data_, other_a, other_b, cfg_.lambda, sets[c]);
        check_loss(value, round_, c);
        loss_sum += value;
    }

    if (n > 1) {
        std::size_t grad_elements = clients_[0]->model.total_elements();
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t r = 0; r < n; ++r) {
                if (r != s) {
                    ledger_.add(round_, s, r, "gradient", grad_elements);
                }
            }
        }
    }
    GradientSet mean = mean_gradients(sets);

    for (std::size_t c = 0; c < n; ++c) {
        std::vector<Tensor*> params;
        for (auto& [name, t] : clients_[c]->model.named_params()) {
            params.push_back(t);
        }
        clients_[c]->opt.apply(params, mean, epoch);
    }

    if (n > 1) {
        auto reference = clients_[0]->model.named_params();
        for (std::size_t c = 1; c < n; ++c) {
            auto other = clients_[c]->model.named_params();
            for (std::size_t i = 0; i < reference.size(); ++i) {
                const Tensor& a = *reference[i].second;
                const Tensor& b = *other[i].second;
                for (std::size_t j = 0; j < a.numel(); ++j) {
                    if (std::fabs(static_cast<double>(a[j]) - static_cast<double>(b[j])) >
                        1e-6) {
                        throw std::runtime_error("round " + std::to_string(round_) +
                                                 ": replica divergence on " +
                                                 reference[i].first + " (client " +
                                                 std::to_string(c) + ")");
                    }
                }
            }
        }
    }

    ++round_;
    return loss_sum / static_cast<double>(n);
}

// ---------- the single-process trainer ----------

LocalTrainer::LocalTrainer(model::DualBranchModel& m, const TrainingData& data,
                           const TrainConfig& cfg)
    : model_(&m), data_(&data), cfg_(cfg), opt_(cfg.opt) {
    if (m.cfg.modality != model::Modality::kFused && cfg.n_clients != 1) {
        throw std::invalid_argument(
            "trainer: single-modality models train with one client only");
    }
    validate_train_config(cfg, data, m);
}

std::size_t LocalTrainer::rounds_per_epoch() const {
    return std::max<std::size_t>(1, ceil_div(max_shard_size(*data_), cfg_.batch));
}

double LocalTrainer::run_round(std::size_t epoch, std::size_t round_in_epoch) {
    std::size_t pairs = cfg_.n_clients == 1 ? 1 : cfg_.n_clients / 2;
    model::Modality mode = model_->cfg.modality;
    auto named = model_->named_params();

    std::vector<GradientSet> sets;
    double loss_sum = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        ClientStep cs;
        cs.batch = batch_indices(*data_, cfg_.seed, p, epoch, round_in_epoch, cfg_.batch);
        forward_own(cs, *model_, *data_, cfg_.seed, epoch + 1,
                    mode != model::Modality::kBOnly, mode != model::Modality::kAOnly);
        GradientSet joint;
        double value = finish_step(cs, *model_, *data_, nullptr, nullptr, cfg_.lambda, joint);
        check_loss(value, round_, 2 * p);
        loss_sum += value;
        if (cfg_.n_clients == 1) {
            sets.push_back(std::move(joint));
            continue;
        }
        // The two per-client contributions this pair would transmit: each
        // side carries the joint gradient minus the branch it cannot see.
        GradientSet side_a, side_b;
        side_a.reserve(joint.size());
        side_b.reserve(joint.size());
        for (std::size_t i = 0; i < joint.size(); ++i) {
            bool in_a = named[i].first.starts_with("branch_a.");
            bool in_b = named[i].first.starts_with("branch_b.");
            side_a.push_back(in_b ? Tensor::zeros(joint[i].shape()) : joint[i]);
            side_b.push_back(in_a ? Tensor::zeros(joint[i].shape()) : joint[i]);
        }
        sets.push_back(std::move(side_a));
        sets.push_back(std::move(side_b));
    }
    GradientSet mean = mean_gradients(sets);
    std::vector<Tensor*> params;
    for (auto& [name, t] : named) {
        params.push_back(t);
    }
    opt_.apply(params, mean, epoch);
    ++round_;
    return loss_sum / static_cast<double>(pairs);
}

// ---------- evaluation ----------

std::vector<Prediction> predict(const model::DualBranchModel& m, const TrainingData& d,
                                const std::vector<std::size_t>& idxs, std::uint64_t seed) {
    std::vector<Prediction> out;
    out.reserve(idxs.size());
    const std::size_t chunk = 32;  // bound tape growth
    for (std::size_t base = 0; base < idxs.size(); base += chunk) {
        Tape t;
        BoundLeaves bl = bind_model(t, m);
        std::size_t hi = std::min(idxs.size(), base + chunk);
        for (std::size_t k = base; k < hi; ++k) {
            std::size_t sample = idxs[k];
            Var fa, fb;
            bool live_a = m.cfg.modality != model::Modality::kBOnly;
            bool live_b = m.cfg.modality != model::Modality::kAOnly;
            if (live_a) {
                Tensor x = stack_input(d, seed, sample, 0, 0);
                fa = net::branch_forward(t, t.leaf(std::move(x)), bl.a, m.cfg.improved);
            }
            if (live_b) {
                Tensor x = stack_input(d, seed, sample, 1, 0);
                fb = net::branch_forward(t, t.leaf(std::move(x)), bl.b, m.cfg.improved);
            }
            if (!live_a) {
                fa = fb;
            }
            if (!live_b) {
                fb = fa;
            }
            fusion::FusePair fp = fusion::fuse(t, fa, fb, bl.fu);
            Var of = fusion::classify(t, fp.fused, bl.fu);
            const Tensor& probs = t.val(of);
            std::size_t arg = 0;
            for (std::size_t j = 1; j < probs.numel(); ++j) {
                if (probs[j] > probs[arg]) {
                    arg = j;
                }
            }
            out.push_back({arg + 1, probs[arg]});
        }
    }
    return out;
}

metrics::Scores evaluate_split(const model::DualBranchModel& m, const TrainingData& d,
                               const std::vector<std::size_t>& idxs, std::uint64_t seed) {
    if (idxs.empty()) {
        throw std::invalid_argument("evaluate: the index set is empty");
    }
    std::vector<Prediction> preds = predict(m, d, idxs, seed);
    std::vector<std::size_t> pred_ids(preds.size()), truths(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        pred_ids[i] = preds[i].cls;
        truths[i] = d.samples[idxs[i]].label;
    }
    metrics::ConfusionMatrix cm(d.n_classes);
    cm.accumulate(pred_ids, truths);
    return metrics::scores(cm);
}

}  // namespace fedfuse::fedsim
