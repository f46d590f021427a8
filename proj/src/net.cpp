#include "fedfuse/net.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedfuse::net {

namespace {

std::size_t padded_dim(std::size_t n, std::size_t factor) {
    std::size_t rem = n % factor;
    return rem == 0 ? n : n + (factor - rem);
}

}  // namespace

AttentionParams::AttentionParams(std::size_t heads_, std::size_t d) : heads(heads_) {
    if (heads == 0) {
        throw std::invalid_argument("attention: head count must be positive");
    }
    if (d == 0 || d % heads != 0) {
        throw std::invalid_argument("attention: width " + std::to_string(d) +
                                    " not divisible into " + std::to_string(heads) + " heads");
    }
    wq = Tensor::zeros({d, d});
    wk = Tensor::zeros({d, d});
    wv = Tensor::zeros({d, d});
    wo = Tensor::zeros({d, d});
}

SpectralFilterParams::SpectralFilterParams(std::size_t h, std::size_t wd, std::size_t c) {
    if (h == 0 || wd == 0 || c == 0) {
        throw std::invalid_argument("spectral filter: dims must be positive");
    }
    w = Tensor::zeros({h, wd, c, 2});
}

BranchParams::BranchParams(std::size_t h, std::size_t w, std::size_t c_in,
                           const std::vector<StageSpec>& specs)
    : in_h(h), in_w(w), in_c(c_in) {
    if (h == 0 || w == 0 || c_in == 0) {
        throw std::invalid_argument("branch: input dims must be positive");
    }
    if (specs.empty()) {
        throw std::invalid_argument("branch: needs at least one stage");
    }
    std::size_t cur_h = h, cur_w = w, cur_c = c_in;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const StageSpec& s = specs[i];
        std::string where = "branch stage " + std::to_string(i) + ": ";
        if (s.factor == 0) {
            throw std::invalid_argument(where + "downsample factor must be positive");
        }
        std::size_t ph = padded_dim(cur_h, s.factor);
        std::size_t pw = padded_dim(cur_w, s.factor);
        if (ph - cur_h >= cur_h || pw - cur_w >= cur_w) {
            throw std::invalid_argument(where + "spatial " + std::to_string(cur_h) + "x" +
                                        std::to_string(cur_w) + " too small to pad to factor " +
                                        std::to_string(s.factor));
        }
        if (s.out_channels == 0) {
            throw std::invalid_argument(where + "output width must be positive");
        }
        if (s.heads == 0 || s.out_channels % s.heads != 0) {
            throw std::invalid_argument(where + "width " + std::to_string(s.out_channels) +
                                        " not divisible into " + std::to_string(s.heads) +
                                        " heads");
        }
        StageParams stage;
        stage.factor = s.factor;
        stage.conv = Tensor::zeros({cur_c, s.out_channels});
        stage.attn = AttentionParams(s.heads, s.out_channels);
        stage.filter = SpectralFilterParams(ph / s.factor, pw / s.factor, s.out_channels);
        stages.push_back(std::move(stage));
        cur_h = ph / s.factor;
        cur_w = pw / s.factor;
        cur_c = s.out_channels;
    }
}

std::vector<StageVars> bind_branch(Tape& t, const BranchParams& p) {
    std::vector<StageVars> out;
    out.reserve(p.stages.size());
    for (const StageParams& s : p.stages) {
        StageVars v;
        v.factor = s.factor;
        v.heads = s.attn.heads;
        v.conv = t.leaf(s.conv);
        v.wq = t.leaf(s.attn.wq);
        v.wk = t.leaf(s.attn.wk);
        v.wv = t.leaf(s.attn.wv);
        v.wo = t.leaf(s.attn.wo);
        v.filter = t.leaf(s.filter.w);
        out.push_back(v);
    }
    return out;
}

Tensor downsample(const Tensor& x, std::size_t factor) {
    Tape t;
    return t.val(t.avgpool(t.leaf(x), factor));
}

Var msa_forward(Tape& t, Var tokens, Var wq, Var wk, Var wv, Var wo, std::size_t heads) {
    const Tensor& x = t.val(tokens);
    if (x.rank() != 2) {
        throw std::invalid_argument("attention: tokens must be rank-2, got shape " +
                                    numkit::shape_str(x.shape()));
    }
    std::size_t d = x.dim(1);
    for (Var w : {wq, wk, wv, wo}) {
        const Tensor& m = t.val(w);
        if (m.rank() != 2 || m.dim(0) != d || m.dim(1) != d) {
            throw std::invalid_argument("attention: projection shape " +
                                        numkit::shape_str(m.shape()) + " does not match width " +
                                        std::to_string(d));
        }
    }
    if (heads == 0 || d % heads != 0) {
        throw std::invalid_argument("attention: width " + std::to_string(d) +
                                    " not divisible into " + std::to_string(heads) + " heads");
    }
    std::size_t dk = d / heads;
    Var q = t.matmul(tokens, wq);
    Var k = t.matmul(tokens, wk);
    Var v = t.matmul(tokens, wv);
    double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Var> merged;
    merged.reserve(heads);
    for (std::size_t i = 0; i < heads; ++i) {
        Var qh = t.slice_cols(q, i * dk, (i + 1) * dk);
        Var kh = t.slice_cols(k, i * dk, (i + 1) * dk);
        Var vh = t.slice_cols(v, i * dk, (i + 1) * dk);
        Var scores = t.scale(t.matmul_nt(qh, kh), scale);
        Var attn = t.softmax_rows(scores);
        merged.push_back(t.matmul(attn, vh));
    }
    Var cat = merged.size() == 1 ? merged[0] : t.concat_cols(merged);
    return t.matmul(cat, wo);
}

Var fdp_forward(Tape& t, Var x, Var filter) {
    return t.spectral_filter(x, filter);
}

Var branch_forward(Tape& t, Var stack, const std::vector<StageVars>& stages, bool improved) {
    const Tensor& x0 = t.val(stack);
    if (x0.rank() != 3) {
        throw std::invalid_argument("branch: input must be h x w x c, got shape " +
                                    numkit::shape_str(x0.shape()));
    }
    if (stages.empty()) {
        throw std::invalid_argument("branch: needs at least one stage");
    }
    Var x = stack;
    for (const StageVars& s : stages) {
        x = t.reflect_pad_to_multiple(x, s.factor);
        x = t.avgpool(x, s.factor);
        std::size_t h = t.val(x).dim(0), w = t.val(x).dim(1), c = t.val(x).dim(2);
        std::size_t c_in = t.val(s.conv).dim(0), c_out = t.val(s.conv).dim(1);
        if (c_in != c) {
            throw std::invalid_argument("branch: stage expects " + std::to_string(c_in) +
                                        " input channels, got " + std::to_string(c));
        }
        Var tokens = t.reshape(x, {h * w, c});
        tokens = t.matmul(tokens, s.conv);
        if (improved) {
            tokens = msa_forward(t, tokens, s.wq, s.wk, s.wv, s.wo, s.heads);
        }
        x = t.reshape(tokens, {h, w, c_out});
        if (improved) {
            x = fdp_forward(t, x, s.filter);
        }
    }
    return x;
}

}  // namespace fedfuse::net
