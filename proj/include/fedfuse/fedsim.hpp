#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "fedfuse/codec.hpp"
#include "fedfuse/dataio.hpp"
#include "fedfuse/diffusion.hpp"
#include "fedfuse/metrics.hpp"
#include "fedfuse/model.hpp"
#include "fedfuse/optim.hpp"
#include "fedfuse/tensor.hpp"

namespace fedfuse::fedsim {

using numkit::Tensor;

// ---------- byte accounting ----------

struct LedgerEntry {
    std::size_t round = 0;
    std::size_t sender = 0, receiver = 0;
    std::string kind;  // feature | feature_lowrank | gradient
    std::size_t elements = 0, bytes = 0;
};

// Append-only record of every message; bytes are always 4x the float32
// element count.
class Ledger {
public:
    void add(std::size_t round, std::size_t sender, std::size_t receiver,
             const std::string& kind, std::size_t elements);

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    std::size_t total_bytes() const;
    std::size_t feature_bytes() const;  // feature + feature_lowrank kinds
    std::size_t gradient_bytes() const;
    std::size_t round_feature_bytes(std::size_t round) const;

    // One "round sender receiver kind elements bytes" line per entry.
    std::string to_text() const;

private:
    std::vector<LedgerEntry> entries_;
};

// Mebibytes with the fraction truncated (not rounded) to three digits.
double mib_truncated(std::size_t bytes);
std::string format_mib(std::size_t bytes);

// ---------- training data ----------

struct SamplePatch {
    Tensor a, b;  // standardized windows, one per modality
    std::size_t label = 0;
    std::size_t row = 0, col = 0;
};

// Everything the trainers share: patches, index splits, one shard of train
// indices per client pair, and the noise schedule feeding the encoders.
struct TrainingData {
    std::vector<SamplePatch> samples;
    std::vector<std::size_t> train, val;
    std::vector<std::vector<std::size_t>> shards;
    diffusion::NoiseSchedule schedule;
    std::vector<int> timesteps;
    std::size_t n_classes = 0;
    dataio::ChannelStats stats_a, stats_b;
};

struct DataConfig {
    std::size_t window = 8;
    std::size_t n_shards = 1;
    double alpha = 0.5;
    int schedule_steps = 1000;
    double beta_min = 1e-4, beta_max = 0.02;
    std::vector<int> timesteps = diffusion::kDefaultTimesteps;
    std::uint64_t seed = 0;
};

// Patches, standardization from the train split only, the train/val split,
// and a non-IID shard per client pair.
TrainingData build_training_data(const dataio::SceneDataset& ds, const DataConfig& cfg);

// The noised multi-timestep stack for one sample and modality (0 = A,
// 1 = B). Noise is keyed by (modality, epoch_key, sample); epoch_key 0 is
// reserved for evaluation so validation scores are reproducible.
Tensor stack_input(const TrainingData& d, std::uint64_t seed, std::size_t sample, int modality,
                   std::size_t epoch_key);

// The sample indices one shard trains on in a given round: a consecutive
// slice of that shard's per-epoch shuffle, wrapping cyclically.
std::vector<std::size_t> batch_indices(const TrainingData& d, std::uint64_t seed,
                                       std::size_t shard, std::size_t epoch,
                                       std::size_t round_in_epoch, std::size_t batch);

// ---------- collectives ----------

using GradientSet = std::vector<Tensor>;

// Element-wise mean in fixed ascending client order with double
// accumulation; every replica computes the identical result.
GradientSet mean_gradients(const std::vector<GradientSet>& per_client);

// ---------- training ----------

struct TrainConfig {
    std::size_t n_clients = 2;  // 1, or an even count
    std::size_t interval = 1;   // rounds between feature exchanges
    codec::CodecConfig codec;
    optim::OptimizerConfig opt;
    double lambda = 1e-4;
    std::size_t batch = 64;
    std::uint64_t seed = 0;
};

// The lockstep federation: every even client holds modality A of one data
// shard, the following odd client holds modality B of the same shard. Each
// round runs local encoders, exchanges (optionally compressed) features,
// computes the fused loss per client, averages gradients over all clients,
// and applies the identical update to every replica. A single-client
// federation holds both modalities and never communicates.
class Federation {
public:
    Federation(const model::DualBranchModel& init, const TrainingData& data,
               const TrainConfig& cfg);
    ~Federation();

    // Returns the mean of the clients' local losses. Throws on a NaN loss
    // or on replica divergence, naming the round.
    double run_round(std::size_t epoch, std::size_t round_in_epoch);

    std::size_t rounds_per_epoch() const;
    std::size_t rounds_run() const { return round_; }
    std::size_t clients() const;
    const Ledger& ledger() const { return ledger_; }
    const model::DualBranchModel& replica(std::size_t client) const;
    model::DualBranchModel& replica(std::size_t client);

private:
    struct Client;
    const TrainingData* data_;
    TrainConfig cfg_;
    Ledger ledger_;
    std::vector<std::unique_ptr<Client>> clients_;
    std::size_t round_ = 0;
};

// The same schedule, batches, noise, loss, and averaging semantics in one
// address space: per shard one joint tape over both branches, gradients
// split into the per-client contributions a federation would produce, then
// the identical mean and update. Single-modality configurations are the
// ablation trainers and require one client.
class LocalTrainer {
public:
    LocalTrainer(model::DualBranchModel& m, const TrainingData& data, const TrainConfig& cfg);

    double run_round(std::size_t epoch, std::size_t round_in_epoch);
    std::size_t rounds_per_epoch() const;
    std::size_t rounds_run() const { return round_; }

private:
    model::DualBranchModel* model_;
    const TrainingData* data_;
    TrainConfig cfg_;
    optim::Optimizer opt_;
    std::size_t round_ = 0;
};

// ---------- evaluation ----------

struct Prediction {
    std::size_t cls = 0;  // 1-based class id
    float max_prob = 0.0f;
};

std::vector<Prediction> predict(const model::DualBranchModel& m, const TrainingData& d,
                                const std::vector<std::size_t>& idxs, std::uint64_t seed);

metrics::Scores evaluate_split(const model::DualBranchModel& m, const TrainingData& d,
                               const std::vector<std::size_t>& idxs, std::uint64_t seed);

}  // namespace fedfuse::fedsim
