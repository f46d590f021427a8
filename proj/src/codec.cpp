#include "fedfuse/codec.hpp"

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "fedfuse/kernels.hpp"
#include "fedfuse/svd.hpp"

namespace fedfuse::codec {

std::size_t EncodedFeature::element_count() const {
    return lowrank ? factors.element_count() : raw.numel();
}

std::size_t pick_rank(const Tensor& singular, std::size_t p, std::size_t q,
                      const CodecConfig& cfg) {
    std::size_t full = std::min(p, q);
    if (singular.rank() != 1 || singular.numel() != full) {
        throw std::invalid_argument("codec: spectrum length must equal min(p, q)");
    }
    switch (cfg.mode) {
        case CodecMode::kOff:
            throw std::invalid_argument("codec: no rank to pick with the codec off");
        case CodecMode::kLossless:
            return full;
        case CodecMode::kFixed:
            if (cfg.rank == 0) {
                throw std::invalid_argument("codec: fixed rank must be at least 1");
            }
            return std::min(cfg.rank, full);
        case CodecMode::kEnergy:
            break;
    }
    if (!(cfg.theta > 0.0) || cfg.theta > 1.0) {
        throw std::invalid_argument("codec: energy threshold must lie in (0, 1]");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < full; ++i) {
        total += static_cast<double>(singular[i]) * static_cast<double>(singular[i]);
    }
    std::size_t cap = std::max<std::size_t>(1, full / 4);
    if (total == 0.0) {
        return 1;
    }
    double cum = 0.0;
    std::size_t t = full;
    for (std::size_t i = 0; i < full; ++i) {
        cum += static_cast<double>(singular[i]) * static_cast<double>(singular[i]);
        if (cum / total >= cfg.theta) {
            t = i + 1;
            break;
        }
    }
    return std::min(t, cap);
}

namespace {

void matrix_dims(const Tensor& f, std::size_t& p, std::size_t& q) {
    if (f.rank() == 2) {
        p = f.dim(0);
        q = f.dim(1);
    } else if (f.rank() == 3) {
        p = f.dim(0) * f.dim(1);  // spatial rows, channel columns
        q = f.dim(2);
    } else {
        throw std::invalid_argument("codec: features must be rank 2 or 3, got rank " +
                                    std::to_string(f.rank()));
    }
    if (p == 0 || q == 0) {
        throw std::invalid_argument("codec: empty feature matrix");
    }
}

}  // namespace

EncodedFeature svd_encode(const Tensor& f, const CodecConfig& cfg) {
    std::size_t p = 0, q = 0;
    matrix_dims(f, p, q);
    EncodedFeature e;
    e.original_shape = f.shape();
    if (cfg.mode == CodecMode::kOff) {
        e.raw = f;
        return e;
    }
    Tensor m = f.reshaped({p, q});
    numkit::SvdResult sv = numkit::svd(m);
    std::size_t t = pick_rank(sv.s, p, q, cfg);

    LowRankFactors lr;
    lr.p = p;
    lr.q = q;
    lr.t = t;
    if (lr.element_count() >= p * q) {
        e.raw = f;  // factors would not pay for themselves
        return e;
    }
    lr.u = Tensor::zeros({p, t});
    lr.s = Tensor::zeros({t});
    lr.v = Tensor::zeros({q, t});
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            lr.u.at(i, j) = sv.u.at(i, j);
        }
    }
    for (std::size_t j = 0; j < t; ++j) {
        lr.s[j] = sv.s[j];
    }
    for (std::size_t i = 0; i < q; ++i) {
        for (std::size_t j = 0; j < t; ++j) {
            lr.v.at(i, j) = sv.v.at(i, j);
        }
    }
    e.lowrank = true;
    e.factors = std::move(lr);
    return e;
}

Tensor svd_decode(const EncodedFeature& e) {
    if (!e.lowrank) {
        if (e.raw.shape() != e.original_shape) {
            throw std::invalid_argument("codec: raw payload shape mismatch");
        }
        return e.raw;
    }
    const LowRankFactors& lr = e.factors;
    if (lr.t == 0 || lr.t > std::min(lr.p, lr.q)) {
        throw std::invalid_argument("codec: rank out of range for the factor shapes");
    }
    if (lr.u.shape() != Shape{lr.p, lr.t} || lr.s.shape() != Shape{lr.t} ||
        lr.v.shape() != Shape{lr.q, lr.t}) {
        throw std::invalid_argument("codec: factor shapes disagree with p, q, t");
    }
    if (numkit::shape_numel(e.original_shape) != lr.p * lr.q) {
        throw std::invalid_argument("codec: original shape disagrees with the factors");
    }
    for (std::size_t i = 0; i < lr.t; ++i) {
        if (lr.s[i] < 0.0f || (i > 0 && lr.s[i] > lr.s[i - 1])) {
            throw std::invalid_argument("codec: singular values must be nonnegative and "
                                        "non-increasing");
        }
    }
    Tensor us({lr.p, lr.t});
    for (std::size_t i = 0; i < lr.p; ++i) {
        for (std::size_t j = 0; j < lr.t; ++j) {
            us.at(i, j) = static_cast<float>(static_cast<double>(lr.u.at(i, j)) *
                                             static_cast<double>(lr.s[j]));
        }
    }
    Tensor out = numkit::matmul_nt(us, lr.v);
    return out.reshaped(e.original_shape);
}

}  // namespace fedfuse::codec
