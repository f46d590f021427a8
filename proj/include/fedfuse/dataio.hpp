#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fedfuse/tensor.hpp"

namespace fedfuse::dataio {

using numkit::Rng;
using numkit::Tensor;

// A co-registered two-modality scene: spectral cube, elevation cube, and a
// shared label map with 0 = background and classes 1..n_classes.
struct SceneDataset {
    std::size_t h = 0, w = 0, n_classes = 0;
    Tensor mod_a;  // h x w x c_A
    Tensor mod_b;  // h x w x c_B
    std::vector<std::uint32_t> labels;  // h * w, row-major

    std::size_t channels_a() const { return mod_a.empty() ? 0 : mod_a.dim(2); }
    std::size_t channels_b() const { return mod_b.empty() ? 0 : mod_b.dim(2); }
    std::uint32_t label_at(std::size_t i, std::size_t j) const { return labels[i * w + j]; }
};

// One training sample: a window from each modality centered on a labeled
// pixel, plus the class id and where it came from.
struct PatchSample {
    Tensor a, b;
    std::size_t label = 0;  // 1..n_classes
    std::size_t row = 0, col = 0;
};

// Builds a deterministic synthetic scene: Voronoi regions around 3N random
// seeds (cycling through background and the N classes), a per-class
// spectral signature in modality A and an elevation level in modality B,
// plus Gaussian pixel noise. Two class pairs share a signature in A and a
// different two share an elevation in B, so only the pair of modalities
// separates everything.
SceneDataset generate_synthetic(std::uint64_t seed, std::size_t h, std::size_t w,
                                std::size_t n_classes, std::size_t c_a = 8, std::size_t c_b = 1,
                                double noise_level = 0.05);

// One sample per labeled pixel; even windows cover offsets [-w/2, w/2),
// borders are mirror-reflected without duplicating the edge pixel.
std::vector<PatchSample> extract_patches(const SceneDataset& ds, std::size_t window = 8);

// Splits per-class sample mass across clients by Dirichlet(alpha) draws.
// Every sample lands on exactly one client; an empty client triggers a
// reseeded retry, and persistent emptiness is an error.
std::vector<std::vector<std::size_t>> partition_noniid(const std::vector<std::size_t>& labels,
                                                       std::size_t n_clients, double alpha,
                                                       std::uint64_t seed);

// Seeded shuffle, then 95% train / 5% validation.
struct SplitIndices {
    std::vector<std::size_t> train, val;
};
SplitIndices split_train_val(std::size_t n, std::uint64_t seed);

// Per-channel standardization statistics over a sample collection.
struct ChannelStats {
    std::vector<double> mean, stdev;
};
ChannelStats channel_stats(const std::vector<const Tensor*>& cubes);
void standardize(Tensor& cube, const ChannelStats& stats);

// FDSC1 container: a two-line text header ("FDSC1", then the five dims)
// followed by the two cubes as little-endian float32 and the label map as
// little-endian uint32, all row-major.
void save_dataset(const SceneDataset& ds, const std::string& path);
SceneDataset load_dataset(const std::string& path);

}  // namespace fedfuse::dataio
