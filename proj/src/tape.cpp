#include "fedfuse/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fedfuse/fft.hpp"
#include "fedfuse/kernels.hpp"

namespace fedfuse::autodiff {

namespace {

using numkit::shape_str;

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(who) + ": shapes disagree, " +
                                    shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

void require_rank(const Tensor& t, std::size_t rank, const char* who) {
    if (t.rank() != rank) {
        throw std::invalid_argument(std::string(who) + ": expected rank " +
                                    std::to_string(rank) + " tensor, got " +
                                    shape_str(t.shape()));
    }
}

}  // namespace

Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
    Node node;
    node.grad = Tensor::zeros(value.shape());
    node.val = std::move(value);
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

double Tape::scalar(Var v) const {
    const Node& n = nodes_[v.idx];
    if (n.hi) return *n.hi;
    if (n.val.numel() != 1) {
        throw std::invalid_argument("scalar: node holds " + shape_str(n.val.shape()));
    }
    return n.val[0];
}

Var Tape::add(Var a, Var b) {
    require_same_shape(val(a), val(b), "add");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += val(b)[i];
    const std::size_t ai = a.idx, bi = b.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        Tensor& gb = t.nodes_[bi].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    };
    return v;
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(val(a), val(b), "sub");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= val(b)[i];
    const std::size_t ai = a.idx, bi = b.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        Tensor& gb = t.nodes_[bi].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    };
    return v;
}

Var Tape::mul(Var a, Var b) {
    require_same_shape(val(a), val(b), "mul");
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= val(b)[i];
    const std::size_t ai = a.idx, bi = b.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        const Tensor& av = t.nodes_[ai].val;
        const Tensor& bv = t.nodes_[bi].val;
        Tensor& ga = t.nodes_[ai].grad;
        Tensor& gb = t.nodes_[bi].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i] * bv[i];
            gb[i] += g[i] * av[i];
        }
    };
    return v;
}

Var Tape::scale(Var a, double s) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = static_cast<float>(out[i] * s);
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    if (nodes_[ai].hi) nodes_[oi].hi = *nodes_[ai].hi * s;
    nodes_[oi].back = [ai, oi, s](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += static_cast<float>(g[i] * s);
        }
    };
    return v;
}

Var Tape::sigmoid(Var a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.numel(); ++i) {
        out[i] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(out[i]))));
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        const Tensor& y = t.nodes_[oi].val;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) {
            ga[i] += g[i] * y[i] * (1.0f - y[i]);
        }
    };
    return v;
}

Var Tape::matmul(Var a, Var b) {
    Tensor out = numkit::matmul(val(a), val(b));
    const std::size_t ai = a.idx, bi = b.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        const Tensor ga = numkit::matmul_nt(g, t.nodes_[bi].val);
        const Tensor gb = numkit::matmul_tn(t.nodes_[ai].val, g);
        Tensor& ga_acc = t.nodes_[ai].grad;
        Tensor& gb_acc = t.nodes_[bi].grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga_acc[i] += ga[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb_acc[i] += gb[i];
    };
    return v;
}

Var Tape::matmul_nt(Var a, Var b) {
    Tensor out = numkit::matmul_nt(val(a), val(b));
    const std::size_t ai = a.idx, bi = b.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, bi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        // c = a . b^T  =>  da = g . b, db = g^T . a
        const Tensor ga = numkit::matmul(g, t.nodes_[bi].val);
        const Tensor gb = numkit::matmul_tn(g, t.nodes_[ai].val);
        Tensor& ga_acc = t.nodes_[ai].grad;
        Tensor& gb_acc = t.nodes_[bi].grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga_acc[i] += ga[i];
        for (std::size_t i = 0; i < gb.numel(); ++i) gb_acc[i] += gb[i];
    };
    return v;
}

Var Tape::softmax_rows(Var a) {
    Tensor out = numkit::softmax_rows(val(a));
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        const Tensor& y = t.nodes_[oi].val;
        Tensor& ga = t.nodes_[ai].grad;
        const std::size_t rows = y.dim(0), cols = y.dim(1);
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                dot += static_cast<double>(g.at(r, c)) * static_cast<double>(y.at(r, c));
            }
            for (std::size_t c = 0; c < cols; ++c) {
                ga.at(r, c) += static_cast<float>(
                    static_cast<double>(y.at(r, c)) * (static_cast<double>(g.at(r, c)) - dot));
            }
        }
    };
    return v;
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& x = val(a);
    require_rank(x, 2, "slice_cols");
    if (c0 >= c1 || c1 > x.dim(1)) {
        throw std::invalid_argument("slice_cols: range [" + std::to_string(c0) + ", " +
                                    std::to_string(c1) + ") invalid for " + shape_str(x.shape()));
    }
    const std::size_t rows = x.dim(0), width = c1 - c0;
    Tensor out({rows, width});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) out.at(r, c) = x.at(r, c0 + c);
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi, c0, rows, width](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < width; ++c) ga.at(r, c0 + c) += g.at(r, c);
        }
    };
    return v;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t rows = val(parts[0]).dim(0);
    std::size_t total = 0;
    for (Var p : parts) {
        require_rank(val(p), 2, "concat_cols");
        if (val(p).dim(0) != rows) {
            throw std::invalid_argument("concat_cols: row counts disagree");
        }
        total += val(p).dim(1);
    }
    Tensor out({rows, total});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& x = val(p);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < x.dim(1); ++c) out.at(r, off + c) = x.at(r, c);
        }
        off += x.dim(1);
    }
    std::vector<std::size_t> idxs;
    idxs.reserve(parts.size());
    for (Var p : parts) idxs.push_back(p.idx);
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [idxs, oi, rows](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        std::size_t off = 0;
        for (std::size_t pi : idxs) {
            Tensor& gp = t.nodes_[pi].grad;
            const std::size_t width = gp.dim(1);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < width; ++c) gp.at(r, c) += g.at(r, off + c);
            }
            off += width;
        }
    };
    return v;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const std::size_t cols = val(parts[0]).dim(1);
    std::size_t total = 0;
    for (Var p : parts) {
        require_rank(val(p), 2, "concat_rows");
        if (val(p).dim(1) != cols) {
            throw std::invalid_argument("concat_rows: column counts disagree");
        }
        total += val(p).dim(0);
    }
    Tensor out({total, cols});
    std::size_t off = 0;
    for (Var p : parts) {
        const Tensor& x = val(p);
        for (std::size_t r = 0; r < x.dim(0); ++r) {
            for (std::size_t c = 0; c < cols; ++c) out.at(off + r, c) = x.at(r, c);
        }
        off += x.dim(0);
    }
    std::vector<std::size_t> idxs;
    idxs.reserve(parts.size());
    for (Var p : parts) idxs.push_back(p.idx);
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [idxs, oi, cols](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        std::size_t off = 0;
        for (std::size_t pi : idxs) {
            Tensor& gp = t.nodes_[pi].grad;
            const std::size_t rows = gp.dim(0);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) gp.at(r, c) += g.at(off + r, c);
            }
            off += rows;
        }
    };
    return v;
}

Var Tape::add_rowvec(Var m, Var v) {
    const Tensor& mv = val(m);
    const Tensor& vv = val(v);
    require_rank(mv, 2, "add_rowvec");
    if (vv.rank() != 2 || vv.dim(0) != 1 || vv.dim(1) != mv.dim(1)) {
        throw std::invalid_argument("add_rowvec: row vector " + shape_str(vv.shape()) +
                                    " incompatible with " + shape_str(mv.shape()));
    }
    Tensor out = mv;
    for (std::size_t r = 0; r < mv.dim(0); ++r) {
        for (std::size_t c = 0; c < mv.dim(1); ++c) out.at(r, c) += vv[c];
    }
    const std::size_t mi = m.idx, vi = v.idx;
    Var res = push(std::move(out), nullptr);
    const std::size_t oi = res.idx;
    nodes_[oi].back = [mi, vi, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& gm = t.nodes_[mi].grad;
        Tensor& gv = t.nodes_[vi].grad;
        const std::size_t rows = g.dim(0), cols = g.dim(1);
        for (std::size_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                gm.at(r, c) += g.at(r, c);
                acc += g.at(r, c);
            }
            gv[c] += static_cast<float>(acc);
        }
    };
    return res;
}

Var Tape::reshape(Var a, Shape shape) {
    Tensor out = val(a).reshaped(std::move(shape));
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
    };
    return v;
}

Var Tape::avgpool(Var a, std::size_t factor) {
    const Tensor& x = val(a);
    require_rank(x, 3, "avgpool");
    if (factor < 1) throw std::invalid_argument("avgpool: factor must be >= 1");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % factor != 0 || w % factor != 0) {
        throw std::invalid_argument("avgpool: " + shape_str(x.shape()) +
                                    " not divisible by factor " + std::to_string(factor));
    }
    const std::size_t oh = h / factor, ow = w / factor;
    Tensor out({oh, ow, c});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (std::size_t di = 0; di < factor; ++di) {
                    for (std::size_t dj = 0; dj < factor; ++dj) {
                        acc += x.at(i * factor + di, j * factor + dj, ch);
                    }
                }
                out.at(i, j, ch) = static_cast<float>(acc * inv);
            }
        }
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi, factor, inv](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        const std::size_t oh = g.dim(0), ow = g.dim(1), c = g.dim(2);
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const float share = static_cast<float>(g.at(i, j, ch) * inv);
                    for (std::size_t di = 0; di < factor; ++di) {
                        for (std::size_t dj = 0; dj < factor; ++dj) {
                            ga.at(i * factor + di, j * factor + dj, ch) += share;
                        }
                    }
                }
            }
        }
    };
    return v;
}

Var Tape::reflect_pad_to_multiple(Var a, std::size_t factor) {
    const Tensor& x = val(a);
    require_rank(x, 3, "reflect_pad_to_multiple");
    if (factor < 1) throw std::invalid_argument("reflect_pad_to_multiple: factor must be >= 1");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const std::size_t ph = (factor - h % factor) % factor;
    const std::size_t pw = (factor - w % factor) % factor;
    if (ph >= h || pw >= w) {
        throw std::invalid_argument("reflect_pad_to_multiple: " + shape_str(x.shape()) +
                                    " too small to mirror up to a multiple of " +
                                    std::to_string(factor));
    }
    if (ph == 0 && pw == 0) return a;
    const std::size_t oh = h + ph, ow = w + pw;
    // Mirror without duplicating the edge row/column.
    std::vector<std::size_t> row_src(oh), col_src(ow);
    for (std::size_t i = 0; i < oh; ++i) row_src[i] = i < h ? i : 2 * h - 2 - i;
    for (std::size_t j = 0; j < ow; ++j) col_src[j] = j < w ? j : 2 * w - 2 - j;
    Tensor out({oh, ow, c});
    for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
            for (std::size_t ch = 0; ch < c; ++ch) {
                out.at(i, j, ch) = x.at(row_src[i], col_src[j], ch);
            }
        }
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi, row_src, col_src](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        const std::size_t oh = g.dim(0), ow = g.dim(1), c = g.dim(2);
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch) {
                    ga.at(row_src[i], col_src[j], ch) += g.at(i, j, ch);
                }
            }
        }
    };
    return v;
}

Var Tape::global_avg_pool(Var a) {
    const Tensor& x = val(a);
    require_rank(x, 3, "global_avg_pool");
    const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    const double inv = 1.0 / static_cast<double>(h * w);
    Tensor out({1, c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) acc += x.at(i, j, ch);
        }
        out[ch] = static_cast<float>(acc * inv);
    }
    const std::size_t ai = a.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [ai, oi, h, w, inv](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        Tensor& ga = t.nodes_[ai].grad;
        const std::size_t c = g.numel();
        for (std::size_t ch = 0; ch < c; ++ch) {
            const float share = static_cast<float>(g[ch] * inv);
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t j = 0; j < w; ++j) ga.at(i, j, ch) += share;
            }
        }
    };
    return v;
}

Var Tape::spectral_filter(Var x, Var w) {
    const Tensor& xv = val(x);
    const Tensor& wv = val(w);
    require_rank(xv, 3, "spectral_filter");
    if (wv.rank() != 4 || wv.dim(0) != xv.dim(0) || wv.dim(1) != xv.dim(1) ||
        wv.dim(2) != xv.dim(2) || wv.dim(3) != 2) {
        throw std::invalid_argument("spectral_filter: filter " + shape_str(wv.shape()) +
                                    " does not match input " + shape_str(xv.shape()) +
                                    " (want h x w x c x 2)");
    }
    const std::size_t h = xv.dim(0), wd = xv.dim(1), c = xv.dim(2);
    const std::size_t plane = h * wd;
    // The whole per-channel pipeline stays in double: only the layer output
    // rounds to float32. Spectra are cached for the adjoint.
    using cd = std::complex<double>;
    std::vector<std::vector<cd>> spectra(c);
    Tensor out({h, wd, c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        std::vector<cd> buf(plane);
        for (std::size_t k = 0; k < plane; ++k) {
            buf[k] = cd(static_cast<double>(xv[k * c + ch]), 0.0);
        }
        numkit::fft2_inplace(buf, h, wd, -1);
        spectra[ch] = buf;
        for (std::size_t k = 0; k < plane; ++k) {
            const std::size_t wk = k * c + ch;  // bin (i, j) of channel ch
            buf[k] *= cd(wv[2 * wk], wv[2 * wk + 1]);
        }
        numkit::fft2_inplace(buf, h, wd, +1);
        const double inv_n = 1.0 / static_cast<double>(plane);
        for (std::size_t k = 0; k < plane; ++k) {
            out[k * c + ch] = static_cast<float>(buf[k].real() * inv_n);
        }
    }
    const std::size_t xi = x.idx, wi_idx = w.idx;
    Var v = push(std::move(out), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].back = [xi, wi_idx, oi, spectra, h, wd, c, plane](Tape& t) {
        const Tensor& g = t.nodes_[oi].grad;
        const Tensor& wv = t.nodes_[wi_idx].val;
        Tensor& gx = t.nodes_[xi].grad;
        Tensor& gw = t.nodes_[wi_idx].grad;
        const double inv_n = 1.0 / static_cast<double>(plane);
        for (std::size_t ch = 0; ch < c; ++ch) {
            // G' = fft2(g) / n; filter grad = conj(M) ⊙ G'; input grad is
            // conj(W) ⊙ G' pulled back by the unnormalized inverse.
            std::vector<cd> gspec(plane);
            for (std::size_t k = 0; k < plane; ++k) {
                gspec[k] = cd(static_cast<double>(g[k * c + ch]), 0.0);
            }
            numkit::fft2_inplace(gspec, h, wd, -1);
            const std::vector<cd>& m = spectra[ch];
            std::vector<cd> gm(plane);
            for (std::size_t k = 0; k < plane; ++k) {
                const cd gp = gspec[k] * inv_n;
                const std::size_t wk = k * c + ch;
                const cd wgrad = std::conj(m[k]) * gp;
                gw[2 * wk] += static_cast<float>(wgrad.real());
                gw[2 * wk + 1] += static_cast<float>(wgrad.imag());
                gm[k] = std::conj(cd(wv[2 * wk], wv[2 * wk + 1])) * gp;
            }
            numkit::fft2_inplace(gm, h, wd, +1);
            for (std::size_t k = 0; k < plane; ++k) {
                gx[k * c + ch] += static_cast<float>(gm[k].real());
            }
        }
    };
    return v;
}

Var Tape::sum(Var a) {
    const Tensor& x = val(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
    const std::size_t ai = a.idx;
    Var v = push(Tensor({1}, {static_cast<float>(acc)}), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].hi = acc;
    nodes_[oi].back = [ai, oi](Tape& t) {
        const float g = t.nodes_[oi].grad[0];
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += g;
    };
    return v;
}

Var Tape::sum_squares(Var a) {
    const Tensor& x = val(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(x[i]);
    }
    const std::size_t ai = a.idx;
    Var v = push(Tensor({1}, {static_cast<float>(acc)}), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].hi = acc;
    nodes_[oi].back = [ai, oi](Tape& t) {
        const float g = t.nodes_[oi].grad[0];
        const Tensor& x = t.nodes_[ai].val;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += 2.0f * g * x[i];
    };
    return v;
}

Var Tape::l2norm(Var a) {
    const Tensor& x = val(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        acc += static_cast<double>(x[i]) * static_cast<double>(x[i]);
    }
    const double norm = std::sqrt(acc);
    const std::size_t ai = a.idx;
    Var v = push(Tensor({1}, {static_cast<float>(norm)}), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].hi = norm;
    // The clamp keeps the all-zero case finite (gradient defined as 0 there).
    nodes_[oi].back = [ai, oi, norm](Tape& t) {
        const double coef = t.nodes_[oi].grad[0] / std::max(norm, 1e-12);
        const Tensor& x = t.nodes_[ai].val;
        Tensor& ga = t.nodes_[ai].grad;
        for (std::size_t i = 0; i < ga.numel(); ++i) {
            ga[i] += static_cast<float>(coef * x[i]);
        }
    };
    return v;
}

Var Tape::add_many(const std::vector<Var>& scalars) {
    if (scalars.empty()) throw std::invalid_argument("add_many: no inputs");
    double acc = 0.0;
    std::vector<std::size_t> idxs;
    idxs.reserve(scalars.size());
    for (Var s : scalars) {
        if (val(s).numel() != 1) {
            throw std::invalid_argument("add_many: inputs must be scalars, got " +
                                        shape_str(val(s).shape()));
        }
        acc += val(s)[0];
        idxs.push_back(s.idx);
    }
    Var v = push(Tensor({1}, {static_cast<float>(acc)}), nullptr);
    const std::size_t oi = v.idx;
    bool all_hi = true;
    double hi = 0.0;
    for (std::size_t si : idxs) {
        if (!nodes_[si].hi) {
            all_hi = false;
            break;
        }
        hi += *nodes_[si].hi;
    }
    if (all_hi) nodes_[oi].hi = hi;
    nodes_[oi].back = [idxs, oi](Tape& t) {
        const float g = t.nodes_[oi].grad[0];
        for (std::size_t si : idxs) t.nodes_[si].grad[0] += g;
    };
    return v;
}

Var Tape::ce_onehot_sum(Var probs, const std::vector<std::size_t>& targets) {
    const Tensor& p = val(probs);
    require_rank(p, 2, "ce_onehot_sum");
    if (targets.size() != p.dim(0)) {
        throw std::invalid_argument("ce_onehot_sum: " + std::to_string(targets.size()) +
                                    " targets for " + std::to_string(p.dim(0)) + " rows");
    }
    constexpr double kClamp = 1e-12;
    double acc = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) {
        if (targets[b] >= p.dim(1)) {
            throw std::invalid_argument("ce_onehot_sum: target " + std::to_string(targets[b]) +
                                        " out of range at row " + std::to_string(b));
        }
        acc -= std::log(std::max(static_cast<double>(p.at(b, targets[b])), kClamp));
    }
    const std::size_t pi = probs.idx;
    Var v = push(Tensor({1}, {static_cast<float>(acc)}), nullptr);
    const std::size_t oi = v.idx;
    nodes_[oi].hi = acc;
    std::vector<std::size_t> tgt = targets;
    nodes_[oi].back = [pi, oi, tgt, kClamp](Tape& t) {
        const float g = t.nodes_[oi].grad[0];
        const Tensor& p = t.nodes_[pi].val;
        Tensor& gp = t.nodes_[pi].grad;
        for (std::size_t b = 0; b < tgt.size(); ++b) {
            const double pv = p.at(b, tgt[b]);
            if (pv >= kClamp) {
                gp.at(b, tgt[b]) -= static_cast<float>(g / pv);
            }
        }
    };
    return v;
}

void Tape::backward(Var root) {
    if (swept_) throw std::invalid_argument("backward: tape already swept");
    if (val(root).numel() != 1) {
        throw std::invalid_argument("backward: root must be a scalar, got " +
                                    shape_str(val(root).shape()));
    }
    swept_ = true;
    nodes_[root.idx].grad[0] = 1.0f;
    for (std::size_t i = root.idx + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this);
    }
}

}  // namespace fedfuse::autodiff
