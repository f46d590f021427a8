#pragma once

#include <cstddef>

#include "fedfuse/tensor.hpp"

namespace fedfuse::codec {

using numkit::Shape;
using numkit::Tensor;

enum class CodecMode {
    kOff,       // raw float transmission
    kLossless,  // full rank; always larger than raw, so always falls back
    kEnergy,    // smallest rank holding theta of the squared singular mass
    kFixed,     // caller-chosen rank
};

struct CodecConfig {
    CodecMode mode = CodecMode::kOff;
    double theta = 0.99;   // energy threshold, in (0, 1]
    std::size_t rank = 8;  // fixed-rank choice, >= 1
};

// Rank-t factorization of a p x q feature matrix: u * diag(s) * v^T with
// u p x t, s length t (non-increasing, nonnegative) and v stored q x t.
struct LowRankFactors {
    Tensor u, s, v;
    std::size_t p = 0, q = 0, t = 0;

    std::size_t element_count() const { return p * t + t + t * q; }
};

// One transmissible feature payload: either the raw values or low-rank
// factors, whichever is smaller. The ledger tells them apart by kind.
struct EncodedFeature {
    bool lowrank = false;
    Tensor raw;              // set when !lowrank
    LowRankFactors factors;  // set when lowrank
    Shape original_shape;

    std::size_t element_count() const;
    const char* kind() const { return lowrank ? "feature_lowrank" : "feature"; }
};

// Rank selection on a descending singular spectrum. Energy mode picks the
// smallest rank whose cumulative squared mass reaches theta, capped at
// min(p, q) / 4 (never below 1); an all-zero spectrum yields rank 1.
std::size_t pick_rank(const Tensor& singular, std::size_t p, std::size_t q,
                      const CodecConfig& cfg);

// Flattens an h x w x c map to an (h*w) x c matrix (rank-2 input is taken
// as-is), factorizes it, and keeps the factors only when they hold strictly
// fewer elements than the raw matrix; otherwise the payload stays raw.
EncodedFeature svd_encode(const Tensor& f, const CodecConfig& cfg);

// u * diag(s) * v^T, reshaped back to the original feature shape. Raw
// payloads pass through bit for bit.
Tensor svd_decode(const EncodedFeature& e);

}  // namespace fedfuse::codec
