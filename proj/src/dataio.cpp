#include "fedfuse/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace fedfuse::dataio {

namespace {

// Mirror-without-duplicate index reflection into [0, n).
std::size_t reflect(long long x, std::size_t n) {
    long long m = static_cast<long long>(n);
    if (x < 0) {
        x = -x;
    }
    if (x >= m) {
        x = 2 * m - 2 - x;
    }
    return static_cast<std::size_t>(x);
}

double gamma_draw(Rng& rng, double alpha) {
    if (alpha < 1.0) {
        double u = 1.0 - rng.uniform();  // (0, 1]
        return gamma_draw(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = rng.normal();
        double v = 1.0 + c * x;
        if (v <= 0.0) {
            continue;
        }
        v = v * v * v;
        double u = 1.0 - rng.uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

SceneDataset generate_synthetic(std::uint64_t seed, std::size_t h, std::size_t w,
                                std::size_t n_classes, std::size_t c_a, std::size_t c_b,
                                double noise_level) {
    if (h < 8 || w < 8) {
        throw std::invalid_argument("generate: scene must be at least 8x8, got " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
    if (n_classes < 2) {
        throw std::invalid_argument("generate: need at least 2 classes");
    }
    if (c_a == 0 || c_b == 0) {
        throw std::invalid_argument("generate: channel counts must be positive");
    }
    if (noise_level < 0.0) {
        throw std::invalid_argument("generate: noise level must be nonnegative");
    }

    Rng rng(seed);
    Rng seed_rng = rng.fork(1);
    Rng noise_a = rng.fork(2);
    Rng noise_b = rng.fork(3);

    // Voronoi layout: 3N seeds cycling background, class 1, ..., class N.
    std::size_t n_seeds = 3 * n_classes;
    std::vector<std::size_t> si(n_seeds), sj(n_seeds), sc(n_seeds);
    for (std::size_t k = 0; k < n_seeds; ++k) {
        si[k] = seed_rng.below(h);
        sj[k] = seed_rng.below(w);
        sc[k] = k % (n_classes + 1);
    }

    SceneDataset ds;
    ds.h = h;
    ds.w = w;
    ds.n_classes = n_classes;
    ds.labels.assign(h * w, 0);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            std::size_t best = 0;
            long long best_d = -1;
            for (std::size_t k = 0; k < n_seeds; ++k) {
                long long di = static_cast<long long>(i) - static_cast<long long>(si[k]);
                long long dj = static_cast<long long>(j) - static_cast<long long>(sj[k]);
                long long d = di * di + dj * dj;
                if (best_d < 0 || d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            ds.labels[i * w + j] = static_cast<std::uint32_t>(sc[best]);
        }
    }

    // Class signatures. Modality A: a one-hot spectral line per class, with
    // classes 2 and 4 copying classes 1 and 3. Modality B: elevation = class
    // id, with classes 3 and 6 copying classes 2 and 5. Each modality alone
    // therefore confuses two class pairs, and the pairs do not overlap.
    std::vector<std::vector<float>> sig_a(n_classes + 1, std::vector<float>(c_a, 0.0f));
    std::vector<std::vector<float>> sig_b(n_classes + 1, std::vector<float>(c_b, 0.0f));
    for (std::size_t k = 1; k <= n_classes; ++k) {
        sig_a[k][(k - 1) % c_a] = 1.0f;
        for (std::size_t c = 0; c < c_b; ++c) {
            sig_b[k][c] = static_cast<float>(k);
        }
    }
    if (n_classes >= 2) {
        sig_a[2] = sig_a[1];
    }
    if (n_classes >= 4) {
        sig_a[4] = sig_a[3];
    }
    if (n_classes >= 3) {
        sig_b[3] = sig_b[2];
    }
    if (n_classes >= 6) {
        sig_b[6] = sig_b[5];
    }

    ds.mod_a = Tensor::zeros({h, w, c_a});
    ds.mod_b = Tensor::zeros({h, w, c_b});
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            std::size_t cls = ds.labels[i * w + j];
            for (std::size_t c = 0; c < c_a; ++c) {
                double v = sig_a[cls][c] + noise_level * noise_a.normal();
                ds.mod_a.at(i, j, c) = static_cast<float>(v);
            }
            for (std::size_t c = 0; c < c_b; ++c) {
                double v = sig_b[cls][c] + noise_level * noise_b.normal();
                ds.mod_b.at(i, j, c) = static_cast<float>(v);
            }
        }
    }
    return ds;
}

std::vector<PatchSample> extract_patches(const SceneDataset& ds, std::size_t window) {
    if (window == 0) {
        throw std::invalid_argument("patches: window must be positive");
    }
    if (window > ds.h || window > ds.w) {
        throw std::invalid_argument("patches: window " + std::to_string(window) +
                                    " exceeds scene " + std::to_string(ds.h) + "x" +
                                    std::to_string(ds.w));
    }
    // Even windows cover offsets [-w/2, w/2); odd windows are centered.
    long long lo = -static_cast<long long>(window / 2);
    if (window % 2 == 1) {
        lo = -static_cast<long long>((window - 1) / 2);
    }

    std::size_t c_a = ds.channels_a(), c_b = ds.channels_b();
    std::vector<PatchSample> out;
    for (std::size_t i = 0; i < ds.h; ++i) {
        for (std::size_t j = 0; j < ds.w; ++j) {
            std::uint32_t label = ds.labels[i * ds.w + j];
            if (label == 0) {
                continue;
            }
            PatchSample s;
            s.label = label;
            s.row = i;
            s.col = j;
            s.a = Tensor::zeros({window, window, c_a});
            s.b = Tensor::zeros({window, window, c_b});
            for (std::size_t pi = 0; pi < window; ++pi) {
                std::size_t src_i = reflect(static_cast<long long>(i) + lo +
                                                static_cast<long long>(pi),
                                            ds.h);
                for (std::size_t pj = 0; pj < window; ++pj) {
                    std::size_t src_j = reflect(static_cast<long long>(j) + lo +
                                                    static_cast<long long>(pj),
                                                ds.w);
                    for (std::size_t c = 0; c < c_a; ++c) {
                        s.a.at(pi, pj, c) = ds.mod_a.at(src_i, src_j, c);
                    }
                    for (std::size_t c = 0; c < c_b; ++c) {
                        s.b.at(pi, pj, c) = ds.mod_b.at(src_i, src_j, c);
                    }
                }
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<std::vector<std::size_t>> partition_noniid(const std::vector<std::size_t>& labels,
                                                       std::size_t n_clients, double alpha,
                                                       std::uint64_t seed) {
    if (n_clients == 0) {
        throw std::invalid_argument("partition: need at least one client");
    }
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("partition: alpha must be positive");
    }
    if (labels.empty()) {
        throw std::invalid_argument("partition: no samples");
    }
    if (n_clients == 1) {
        std::vector<std::size_t> all(labels.size());
        std::iota(all.begin(), all.end(), 0);
        return {all};
    }

    // Group sample indices by class, in input order.
    std::vector<std::size_t> classes;
    for (std::size_t lbl : labels) {
        if (std::find(classes.begin(), classes.end(), lbl) == classes.end()) {
            classes.push_back(lbl);
        }
    }
    std::sort(classes.begin(), classes.end());

    Rng master(seed);
    const int max_attempts = 10;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        std::vector<std::vector<std::size_t>> shards(n_clients);
        for (std::size_t ci = 0; ci < classes.size(); ++ci) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < labels.size(); ++i) {
                if (labels[i] == classes[ci]) {
                    members.push_back(i);
                }
            }
            Rng rng = master.fork(static_cast<std::uint64_t>(attempt), ci);
            // Seeded shuffle so the quota cut points land on random members.
            for (std::size_t i = members.size(); i > 1; --i) {
                std::swap(members[i - 1], members[rng.below(i)]);
            }
            // Dirichlet(alpha) proportions over clients.
            std::vector<double> p(n_clients);
            double total = 0.0;
            for (double& v : p) {
                v = gamma_draw(rng, alpha);
                total += v;
            }
            std::vector<std::size_t> quota(n_clients, 0);
            if (total <= 0.0) {
                quota.assign(n_clients, 0);
                for (std::size_t i = 0; i < members.size(); ++i) {
                    ++quota[i % n_clients];
                }
            } else {
                // Largest-remainder rounding keeps the counts exhaustive.
                std::size_t used = 0;
                std::vector<double> frac(n_clients);
                for (std::size_t k = 0; k < n_clients; ++k) {
                    double share = p[k] / total * static_cast<double>(members.size());
                    quota[k] = static_cast<std::size_t>(share);
                    frac[k] = share - static_cast<double>(quota[k]);
                    used += quota[k];
                }
                std::vector<std::size_t> order(n_clients);
                std::iota(order.begin(), order.end(), 0);
                std::stable_sort(order.begin(), order.end(),
                                 [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
                for (std::size_t r = 0; used + r < members.size(); ++r) {
                    ++quota[order[r % n_clients]];
                }
            }
            std::size_t cursor = 0;
            for (std::size_t k = 0; k < n_clients; ++k) {
                for (std::size_t q = 0; q < quota[k] && cursor < members.size(); ++q) {
                    shards[k].push_back(members[cursor++]);
                }
            }
            // Rounding can strand a tail; give it to the emptiest client.
            while (cursor < members.size()) {
                std::size_t smallest = 0;
                for (std::size_t k = 1; k < n_clients; ++k) {
                    if (shards[k].size() < shards[smallest].size()) {
                        smallest = k;
                    }
                }
                shards[smallest].push_back(members[cursor++]);
            }
        }
        bool ok = true;
        for (const auto& s : shards) {
            if (s.empty()) {
                ok = false;
                break;
            }
        }
        if (ok) {
            for (auto& s : shards) {
                std::sort(s.begin(), s.end());
            }
            return shards;
        }
    }
    throw std::runtime_error("partition: a client stayed empty after " +
                             std::to_string(max_attempts) + " attempts (" +
                             std::to_string(labels.size()) + " samples, " +
                             std::to_string(n_clients) + " clients, alpha=" +
                             std::to_string(alpha) + ")");
}

SplitIndices split_train_val(std::size_t n, std::uint64_t seed) {
    if (n == 0) {
        throw std::invalid_argument("split: no samples");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    std::size_t train_n = std::max<std::size_t>(1, n * 95 / 100);
    SplitIndices out;
    out.train.assign(idx.begin(), idx.begin() + static_cast<long long>(train_n));
    out.val.assign(idx.begin() + static_cast<long long>(train_n), idx.end());
    return out;
}

ChannelStats channel_stats(const std::vector<const Tensor*>& cubes) {
    if (cubes.empty()) {
        throw std::invalid_argument("stats: no cubes");
    }
    std::size_t c = (*cubes[0]).dim(2);
    std::vector<double> sum(c, 0.0), sumsq(c, 0.0);
    std::size_t count = 0;
    for (const Tensor* t : cubes) {
        if (t->rank() != 3 || t->dim(2) != c) {
            throw std::invalid_argument("stats: cubes disagree on channels");
        }
        std::size_t pixels = t->dim(0) * t->dim(1);
        for (std::size_t p = 0; p < pixels; ++p) {
            for (std::size_t k = 0; k < c; ++k) {
                double v = static_cast<double>((*t)[p * c + k]);
                sum[k] += v;
                sumsq[k] += v * v;
            }
        }
        count += pixels;
    }
    ChannelStats stats;
    stats.mean.resize(c);
    stats.stdev.resize(c);
    for (std::size_t k = 0; k < c; ++k) {
        stats.mean[k] = sum[k] / static_cast<double>(count);
        double var = sumsq[k] / static_cast<double>(count) - stats.mean[k] * stats.mean[k];
        stats.stdev[k] = std::sqrt(std::max(var, 0.0));
        if (stats.stdev[k] < 1e-8) {
            stats.stdev[k] = 1.0;  // constant channels pass through centered
        }
    }
    return stats;
}

void standardize(Tensor& cube, const ChannelStats& stats) {
    if (cube.rank() != 3 || cube.dim(2) != stats.mean.size()) {
        throw std::invalid_argument("standardize: cube does not match the statistics");
    }
    std::size_t pixels = cube.dim(0) * cube.dim(1), c = stats.mean.size();
    for (std::size_t p = 0; p < pixels; ++p) {
        for (std::size_t k = 0; k < c; ++k) {
            double v = static_cast<double>(cube[p * c + k]);
            cube[p * c + k] = static_cast<float>((v - stats.mean[k]) / stats.stdev[k]);
        }
    }
}

void save_dataset(const SceneDataset& ds, const std::string& path) {
    if (ds.h == 0 || ds.w == 0 || ds.mod_a.empty() || ds.mod_b.empty() ||
        ds.labels.size() != ds.h * ds.w) {
        throw std::invalid_argument("save: dataset is incomplete");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("save: cannot open " + path);
    }
    out << "FDSC1\n"
        << ds.h << " " << ds.w << " " << ds.channels_a() << " " << ds.channels_b() << " "
        << ds.n_classes << "\n";
    for (std::size_t i = 0; i < ds.mod_a.numel(); ++i) {
        put_f32(out, ds.mod_a[i]);
    }
    for (std::size_t i = 0; i < ds.mod_b.numel(); ++i) {
        put_f32(out, ds.mod_b[i]);
    }
    for (std::uint32_t lbl : ds.labels) {
        put_u32(out, lbl);
    }
    if (!out) {
        throw std::runtime_error("save: write failed for " + path);
    }
}

SceneDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load: cannot open " + path);
    }
    std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::string magic = "FDSC1\n";
    if (blob.size() < magic.size() || blob.compare(0, magic.size(), magic) != 0) {
        throw std::runtime_error("load: bad magic at offset 0 (expected FDSC1): " + path);
    }
    std::size_t header_end = blob.find('\n', magic.size());
    if (header_end == std::string::npos) {
        throw std::runtime_error("load: unterminated header after offset " +
                                 std::to_string(magic.size()) + ": " + path);
    }
    std::size_t h = 0, w = 0, c_a = 0, c_b = 0, n_classes = 0;
    {
        std::string line = blob.substr(magic.size(), header_end - magic.size());
        char extra;
        std::istringstream hs(line);
        if (!(hs >> h >> w >> c_a >> c_b >> n_classes) || (hs >> extra)) {
            throw std::runtime_error("load: malformed header at offset " +
                                     std::to_string(magic.size()) + ": " + path);
        }
    }
    if (h == 0 || w == 0 || c_a == 0 || c_b == 0 || n_classes == 0) {
        throw std::runtime_error("load: header declares empty dimensions: " + path);
    }

    std::size_t offset = header_end + 1;
    std::size_t need_a = h * w * c_a * 4, need_b = h * w * c_b * 4, need_l = h * w * 4;
    std::size_t need = need_a + need_b + need_l;
    if (blob.size() - offset < need) {
        throw std::runtime_error("load: truncated payload at offset " + std::to_string(offset) +
                                 " (expected " + std::to_string(need) + " bytes, got " +
                                 std::to_string(blob.size() - offset) + "): " + path);
    }
    if (blob.size() - offset > need) {
        throw std::runtime_error("load: unexpected trailing data at offset " +
                                 std::to_string(offset + need) + ": " + path);
    }

    const unsigned char* p = reinterpret_cast<const unsigned char*>(blob.data()) + offset;
    SceneDataset ds;
    ds.h = h;
    ds.w = w;
    ds.n_classes = n_classes;
    ds.mod_a = Tensor::zeros({h, w, c_a});
    ds.mod_b = Tensor::zeros({h, w, c_b});
    for (std::size_t i = 0; i < ds.mod_a.numel(); ++i, p += 4) {
        ds.mod_a[i] = std::bit_cast<float>(read_u32(p));
    }
    for (std::size_t i = 0; i < ds.mod_b.numel(); ++i, p += 4) {
        ds.mod_b[i] = std::bit_cast<float>(read_u32(p));
    }
    ds.labels.resize(h * w);
    for (std::size_t i = 0; i < ds.labels.size(); ++i, p += 4) {
        std::uint32_t lbl = read_u32(p);
        if (lbl > n_classes) {
            throw std::runtime_error("load: label " + std::to_string(lbl) + " at offset " +
                                     std::to_string(offset + need_a + need_b + i * 4) +
                                     " out of range 0.." + std::to_string(n_classes) + ": " +
                                     path);
        }
        ds.labels[i] = lbl;
    }
    return ds;
}

}  // namespace fedfuse::dataio
