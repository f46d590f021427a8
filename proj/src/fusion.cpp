#include "fedfuse/fusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedfuse::fusion {

FusionParams::FusionParams(std::size_t c_in, std::size_t c_out, std::size_t n_classes,
                           float tau_) {
    if (c_in == 0 || c_out == 0) {
        throw std::invalid_argument("fusion: channel counts must be positive");
    }
    if (n_classes < 2) {
        throw std::invalid_argument("fusion: need at least 2 classes, got " +
                                    std::to_string(n_classes));
    }
    if (!(tau_ >= 0.0f && tau_ <= 1.0f)) {
        throw std::invalid_argument("fusion: tau must lie in [0, 1]");
    }
    cb = Tensor::zeros({c_in, c_out});
    cd = Tensor::zeros({c_in, c_out});
    cl = Tensor::zeros({c_in, c_out});
    head_w = Tensor::zeros({c_out, n_classes});
    head_b = Tensor::zeros({1, n_classes});
    tau = tau_;
}

FusionVars bind_fusion(Tape& t, const FusionParams& p) {
    FusionVars v;
    v.cb = t.leaf(p.cb);
    v.cd = t.leaf(p.cd);
    v.cl = t.leaf(p.cl);
    v.head_w = t.leaf(p.head_w);
    v.head_b = t.leaf(p.head_b);
    return v;
}

FusePair fuse(Tape& t, Var f_hsi, Var f_lidar, const FusionVars& p) {
    Shape in_shape = t.val(f_hsi).shape();
    if (!t.val(f_hsi).same_shape(t.val(f_lidar))) {
        throw std::invalid_argument("fuse: inputs differ in shape, " +
                                    numkit::shape_str(in_shape) + " vs " +
                                    numkit::shape_str(t.val(f_lidar).shape()));
    }
    std::size_t rank = in_shape.size();
    if (rank != 2 && rank != 3) {
        throw std::invalid_argument("fuse: inputs must be n x c or h x w x c, got shape " +
                                    numkit::shape_str(in_shape));
    }
    std::size_t c = in_shape[rank - 1];
    std::size_t c_in = t.val(p.cb).dim(0), c_out = t.val(p.cb).dim(1);
    if (c != c_in) {
        throw std::invalid_argument("fuse: projections expect " + std::to_string(c_in) +
                                    " channels, inputs have " + std::to_string(c));
    }
    std::size_t n = t.val(f_hsi).numel() / c;
    Var th = rank == 3 ? t.reshape(f_hsi, {n, c}) : f_hsi;
    Var tl = rank == 3 ? t.reshape(f_lidar, {n, c}) : f_lidar;

    Var base_h = t.matmul(th, p.cb);
    Var base_l = t.matmul(tl, p.cb);
    Var f1 = t.add(t.mul(t.sigmoid(t.matmul(th, p.cd)), base_l), base_h);
    Var f2 = t.add(t.mul(t.sigmoid(t.matmul(th, p.cl)), base_l), base_h);
    Var fused = t.add(f1, f2);

    FusePair out;
    if (rank == 3) {
        Shape out_shape = {in_shape[0], in_shape[1], c_out};
        out.f1 = t.reshape(f1, out_shape);
        out.f2 = t.reshape(f2, out_shape);
        out.fused = t.reshape(fused, out_shape);
    } else {
        out.f1 = f1;
        out.f2 = f2;
        out.fused = fused;
    }
    return out;
}

Var classify(Tape& t, Var feature, const FusionVars& p) {
    std::size_t rank = t.val(feature).rank();
    Var pooled = feature;
    if (rank == 3) {
        pooled = t.global_avg_pool(feature);
    } else if (rank != 2 || t.val(feature).dim(0) != 1) {
        throw std::invalid_argument("classify: expected an h x w x c map or a 1 x c row, got " +
                                    numkit::shape_str(t.val(feature).shape()));
    }
    std::size_t c = t.val(pooled).dim(1);
    if (c != t.val(p.head_w).dim(0)) {
        throw std::invalid_argument("classify: head expects " +
                                    std::to_string(t.val(p.head_w).dim(0)) +
                                    " features, got " + std::to_string(c));
    }
    return t.softmax_rows(t.add_rowvec(t.matmul(pooled, p.head_w), p.head_b));
}

int threshold_map(const Tensor& probs, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("threshold: tau must lie in [0, 1]");
    }
    if (probs.empty()) {
        throw std::invalid_argument("threshold: empty probability vector");
    }
    double mx = static_cast<double>(probs[0]);
    for (std::size_t i = 1; i < probs.numel(); ++i) {
        mx = std::max(mx, static_cast<double>(probs[i]));
    }
    return mx >= tau ? 1 : 0;
}

Var loss(Tape& t, const LogitsBundle& b, const std::vector<Var>& reg_weights, double lambda) {
    const Tensor& of = t.val(b.fused);
    if (of.rank() != 2) {
        throw std::invalid_argument("loss: probability matrices must be n x N");
    }
    if (!of.same_shape(t.val(b.hsi)) || !of.same_shape(t.val(b.lidar))) {
        throw std::invalid_argument("loss: probability matrices differ in shape");
    }
    std::size_t n = of.dim(0), classes = of.dim(1);
    if (b.targets.size() != n) {
        throw std::invalid_argument("loss: got " + std::to_string(b.targets.size()) +
                                    " targets for " + std::to_string(n) + " rows");
    }
    if (lambda < 0.0) {
        throw std::invalid_argument("loss: lambda must be nonnegative");
    }
    for (Var v : {b.fused, b.hsi, b.lidar}) {
        const Tensor& m = t.val(v);
        for (std::size_t i = 0; i < n; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < classes; ++j) {
                float e = m.at(i, j);
                if (e < -1e-6f) {
                    throw std::invalid_argument("loss: negative probability in row " +
                                                std::to_string(i));
                }
                row += static_cast<double>(e);
            }
            if (std::abs(row - 1.0) > 1e-4) {
                throw std::invalid_argument("loss: row " + std::to_string(i) +
                                            " does not sum to 1");
            }
        }
    }

    Var ce = t.ce_onehot_sum(b.fused, b.targets);
    Var consistency = t.scale(t.add(t.sum_squares(t.sub(b.fused, b.hsi)),
                                    t.sum_squares(t.sub(b.fused, b.lidar))),
                              1.0 / static_cast<double>(n));
    std::vector<Var> terms = {ce, consistency};
    if (lambda > 0.0 && !reg_weights.empty()) {
        std::vector<Var> norms;
        norms.reserve(reg_weights.size());
        for (Var w : reg_weights) {
            norms.push_back(t.l2norm(w));
        }
        terms.push_back(t.scale(t.add_many(norms), lambda));
    }
    return t.add_many(terms);
}

}  // namespace fedfuse::fusion
