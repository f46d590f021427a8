#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "fedfuse/dataio.hpp"
#include "fedfuse/tensor.hpp"

using fedfuse::dataio::PatchSample;
using fedfuse::dataio::SceneDataset;
using fedfuse::numkit::Rng;
using fedfuse::numkit::Tensor;

namespace {

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        return false;
    }
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (a[i] != b[i]) {
            return false;
        }
    }
    return true;
}

// Collect one representative feature vector per class (both modalities).
std::vector<double> pixel_features(const SceneDataset& ds, std::size_t i, std::size_t j,
                                   bool use_a, bool use_b) {
    std::vector<double> f;
    if (use_a) {
        for (std::size_t c = 0; c < ds.channels_a(); ++c) {
            f.push_back(static_cast<double>(ds.mod_a.at(i, j, c)));
        }
    }
    if (use_b) {
        for (std::size_t c = 0; c < ds.channels_b(); ++c) {
            f.push_back(static_cast<double>(ds.mod_b.at(i, j, c)));
        }
    }
    return f;
}

double nearest_mean_accuracy(const SceneDataset& ds, bool use_a, bool use_b) {
    std::map<std::uint32_t, std::vector<double>> sums;
    std::map<std::uint32_t, std::size_t> counts;
    for (std::size_t i = 0; i < ds.h; ++i) {
        for (std::size_t j = 0; j < ds.w; ++j) {
            std::uint32_t lbl = ds.label_at(i, j);
            if (lbl == 0) {
                continue;
            }
            std::vector<double> f = pixel_features(ds, i, j, use_a, use_b);
            if (sums[lbl].empty()) {
                sums[lbl].assign(f.size(), 0.0);
            }
            for (std::size_t k = 0; k < f.size(); ++k) {
                sums[lbl][k] += f[k];
            }
            ++counts[lbl];
        }
    }
    std::map<std::uint32_t, std::vector<double>> means;
    for (auto& [lbl, s] : sums) {
        means[lbl] = s;
        for (double& v : means[lbl]) {
            v /= static_cast<double>(counts[lbl]);
        }
    }
    std::size_t hit = 0, total = 0;
    for (std::size_t i = 0; i < ds.h; ++i) {
        for (std::size_t j = 0; j < ds.w; ++j) {
            std::uint32_t lbl = ds.label_at(i, j);
            if (lbl == 0) {
                continue;
            }
            std::vector<double> f = pixel_features(ds, i, j, use_a, use_b);
            double best = 1e300;
            std::uint32_t arg = 0;
            for (const auto& [cls, mu] : means) {
                double d = 0.0;
                for (std::size_t k = 0; k < f.size(); ++k) {
                    d += (f[k] - mu[k]) * (f[k] - mu[k]);
                }
                if (d < best) {
                    best = d;
                    arg = cls;
                }
            }
            hit += arg == lbl ? 1 : 0;
            ++total;
        }
    }
    return static_cast<double>(hit) / static_cast<double>(total);
}

// A tiny scene with hand-set contents.
SceneDataset tiny_scene(std::size_t h, std::size_t w) {
    SceneDataset ds;
    ds.h = h;
    ds.w = w;
    ds.n_classes = 2;
    ds.mod_a = Tensor::zeros({h, w, 1});
    ds.mod_b = Tensor::zeros({h, w, 1});
    ds.labels.assign(h * w, 0);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            ds.mod_a.at(i, j, 0) = static_cast<float>(i * 10 + j);
            ds.mod_b.at(i, j, 0) = static_cast<float>(100 + i + j);
        }
    }
    return ds;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
    SceneDataset a = fedfuse::dataio::generate_synthetic(7, 16, 16, 3, 4, 1, 0.05);
    SceneDataset b = fedfuse::dataio::generate_synthetic(7, 16, 16, 3, 4, 1, 0.05);
    CHECK(bitwise_equal(a.mod_a, b.mod_a));
    CHECK(bitwise_equal(a.mod_b, b.mod_b));
    CHECK(a.labels == b.labels);

    SceneDataset c = fedfuse::dataio::generate_synthetic(8, 16, 16, 3, 4, 1, 0.05);
    CHECK_FALSE(bitwise_equal(a.mod_a, c.mod_a));
}

TEST_CASE("zero noise exposes the signature structure") {
    SceneDataset ds = fedfuse::dataio::generate_synthetic(3, 24, 24, 6, 8, 1, 0.0);

    // Within a class every pixel is identical; grab exemplars.
    std::map<std::uint32_t, std::vector<double>> a_sig, b_sig;
    for (std::size_t i = 0; i < ds.h; ++i) {
        for (std::size_t j = 0; j < ds.w; ++j) {
            std::uint32_t lbl = ds.label_at(i, j);
            std::vector<double> fa = pixel_features(ds, i, j, true, false);
            std::vector<double> fb = pixel_features(ds, i, j, false, true);
            if (a_sig.count(lbl)) {
                CHECK(a_sig[lbl] == fa);
                CHECK(b_sig[lbl] == fb);
            } else {
                a_sig[lbl] = fa;
                b_sig[lbl] = fb;
            }
        }
    }
    REQUIRE(a_sig.count(0) == 1);  // background present
    for (std::uint32_t k = 1; k <= 6; ++k) {
        REQUIRE(a_sig.count(k) == 1);
    }

    // Two pairs collide in the spectral modality, a different two in the
    // elevation modality, and no pair collides in both.
    CHECK(a_sig[1] == a_sig[2]);
    CHECK(a_sig[3] == a_sig[4]);
    CHECK(b_sig[2] == b_sig[3]);
    CHECK(b_sig[5] == b_sig[6]);
    CHECK(a_sig[2] != a_sig[3]);
    CHECK(a_sig[5] != a_sig[6]);
    CHECK(b_sig[1] != b_sig[2]);
    CHECK(b_sig[3] != b_sig[4]);
    for (std::uint32_t x = 1; x <= 6; ++x) {
        for (std::uint32_t y = x + 1; y <= 6; ++y) {
            bool same_a = a_sig[x] == a_sig[y];
            bool same_b = b_sig[x] == b_sig[y];
            CHECK_FALSE((same_a && same_b));
        }
    }
    // Background carries the zero signature in both modalities.
    for (double v : a_sig[0]) {
        CHECK(v == 0.0);
    }
    for (double v : b_sig[0]) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("generation rejects bad configurations") {
    CHECK_THROWS_AS(fedfuse::dataio::generate_synthetic(0, 4, 16, 3), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::dataio::generate_synthetic(0, 16, 16, 1), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::dataio::generate_synthetic(0, 16, 16, 3, 0), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::dataio::generate_synthetic(0, 16, 16, 3, 4, 1, -0.1),
                    std::invalid_argument);
}

TEST_CASE("modality pair separates classes that single modalities cannot") {
    SceneDataset ds = fedfuse::dataio::generate_synthetic(0, 64, 64, 6);
    for (std::uint32_t k = 1; k <= 6; ++k) {
        std::size_t n = 0;
        for (std::uint32_t lbl : ds.labels) {
            n += lbl == k ? 1 : 0;
        }
        CHECK(n > 0);  // every class occupies some region on the fixed seed
    }
    double both = nearest_mean_accuracy(ds, true, true);
    double only_a = nearest_mean_accuracy(ds, true, false);
    double only_b = nearest_mean_accuracy(ds, false, true);
    CHECK(both >= 0.95);
    CHECK(only_a <= 0.90);
    CHECK(only_b <= 0.90);
}

TEST_CASE("patch extraction yields one sample per labeled pixel") {
    SceneDataset ds = tiny_scene(8, 8);
    CHECK(fedfuse::dataio::extract_patches(ds, 4).empty());

    ds.labels[0 * 8 + 0] = 1;
    ds.labels[2 * 8 + 5] = 2;
    ds.labels[7 * 8 + 7] = 1;
    ds.labels[4 * 8 + 4] = 2;
    std::vector<PatchSample> ps = fedfuse::dataio::extract_patches(ds, 4);
    REQUIRE(ps.size() == 4);
    CHECK(ps[0].row == 0);
    CHECK(ps[0].col == 0);
    CHECK(ps[0].label == 1);
    CHECK(ps[1].row == 2);
    CHECK(ps[1].col == 5);
    CHECK(ps[3].label == 1);
    CHECK(ps[0].a.shape() == fedfuse::numkit::Shape{4, 4, 1});
    CHECK(ps[0].b.shape() == fedfuse::numkit::Shape{4, 4, 1});
}

TEST_CASE("corner patches mirror without duplicating the edge") {
    SceneDataset ds = tiny_scene(4, 4);
    ds.labels[0] = 1;  // corner pixel (0, 0)
    std::vector<PatchSample> ps = fedfuse::dataio::extract_patches(ds, 4);
    REQUIRE(ps.size() == 1);

    // Window 4 covers offsets -2..1; reflected source rows are [2, 1, 0, 1].
    std::size_t src[4] = {2, 1, 0, 1};
    for (std::size_t pi = 0; pi < 4; ++pi) {
        for (std::size_t pj = 0; pj < 4; ++pj) {
            CHECK(ps[0].a.at(pi, pj, 0) == ds.mod_a.at(src[pi], src[pj], 0));
            CHECK(ps[0].b.at(pi, pj, 0) == ds.mod_b.at(src[pi], src[pj], 0));
        }
    }
}

TEST_CASE("odd windows center on the pixel") {
    SceneDataset ds = tiny_scene(5, 5);
    ds.labels[2 * 5 + 2] = 1;
    std::vector<PatchSample> ps = fedfuse::dataio::extract_patches(ds, 3);
    REQUIRE(ps.size() == 1);
    for (std::size_t pi = 0; pi < 3; ++pi) {
        for (std::size_t pj = 0; pj < 3; ++pj) {
            CHECK(ps[0].a.at(pi, pj, 0) == ds.mod_a.at(1 + pi, 1 + pj, 0));
        }
    }
}

TEST_CASE("patch windows larger than the scene are rejected") {
    SceneDataset ds = tiny_scene(4, 6);
    ds.labels[0] = 1;
    CHECK_THROWS_AS(fedfuse::dataio::extract_patches(ds, 5), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::dataio::extract_patches(ds, 0), std::invalid_argument);
    CHECK_NOTHROW(fedfuse::dataio::extract_patches(ds, 4));
}

TEST_CASE("partitioning basics") {
    std::vector<std::size_t> labels(30);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = 1 + i % 3;
    }

    SUBCASE("single client receives everything") {
        auto shards = fedfuse::dataio::partition_noniid(labels, 1, 0.5, 9);
        REQUIRE(shards.size() == 1);
        CHECK(shards[0].size() == labels.size());
    }

    SUBCASE("clients partition the index set") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto shards = fedfuse::dataio::partition_noniid(labels, 4, 0.5, seed);
            REQUIRE(shards.size() == 4);
            std::vector<std::size_t> all;
            for (const auto& s : shards) {
                CHECK_FALSE(s.empty());
                all.insert(all.end(), s.begin(), s.end());
            }
            std::sort(all.begin(), all.end());
            std::vector<std::size_t> expect(labels.size());
            std::iota(expect.begin(), expect.end(), 0);
            CHECK(all == expect);
        }
    }

    SUBCASE("same seed, same partition") {
        auto a = fedfuse::dataio::partition_noniid(labels, 3, 0.3, 42);
        auto b = fedfuse::dataio::partition_noniid(labels, 3, 0.3, 42);
        CHECK(a == b);
    }

    SUBCASE("validation") {
        CHECK_THROWS_AS(fedfuse::dataio::partition_noniid(labels, 0, 0.5, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(fedfuse::dataio::partition_noniid(labels, 2, 0.0, 0),
                        std::invalid_argument);
        CHECK_THROWS_AS(fedfuse::dataio::partition_noniid({}, 2, 0.5, 0), std::invalid_argument);
    }
}

TEST_CASE("large alpha approaches a uniform split") {
    std::vector<std::size_t> labels(450);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = 1 + i % 3;  // 150 samples in each of 3 classes
    }
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto shards = fedfuse::dataio::partition_noniid(labels, 4, 1000.0, seed);
        for (const auto& s : shards) {
            std::size_t hist[3] = {0, 0, 0};
            for (std::size_t idx : s) {
                ++hist[labels[idx] - 1];
            }
            double total = static_cast<double>(s.size());
            for (std::size_t c = 0; c < 3; ++c) {
                double share = static_cast<double>(hist[c]) / total;
                CHECK(share >= 1.0 / 3.0 * 0.9);
                CHECK(share <= 1.0 / 3.0 * 1.1);
            }
        }
    }
}

TEST_CASE("persistently empty clients are reported") {
    std::vector<std::size_t> labels = {1, 1};
    CHECK_THROWS_WITH_AS(fedfuse::dataio::partition_noniid(labels, 8, 1.0, 0),
                         doctest::Contains("10 attempts"), std::runtime_error);
}

TEST_CASE("train/validation split") {
    fedfuse::dataio::SplitIndices s = fedfuse::dataio::split_train_val(100, 5);
    CHECK(s.train.size() == 95);
    CHECK(s.val.size() == 5);
    std::vector<std::size_t> all = s.train;
    all.insert(all.end(), s.val.begin(), s.val.end());
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);

    fedfuse::dataio::SplitIndices again = fedfuse::dataio::split_train_val(100, 5);
    CHECK(again.train == s.train);

    fedfuse::dataio::SplitIndices tiny = fedfuse::dataio::split_train_val(5, 1);
    CHECK(tiny.train.size() == 4);
    CHECK(tiny.val.size() == 1);
    CHECK_THROWS_AS(fedfuse::dataio::split_train_val(0, 1), std::invalid_argument);
}

TEST_CASE("channel statistics and standardization") {
    Tensor a({1, 2, 2}, {1.0f, 10.0f, 3.0f, 10.0f});
    Tensor b({1, 2, 2}, {5.0f, 10.0f, 7.0f, 10.0f});
    fedfuse::dataio::ChannelStats st = fedfuse::dataio::channel_stats({&a, &b});
    REQUIRE(st.mean.size() == 2);
    CHECK(st.mean[0] == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(st.mean[1] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(st.stdev[0] == doctest::Approx(std::sqrt(5.0)).epsilon(1e-9));
    CHECK(st.stdev[1] == 1.0);  // constant channel passes through centered

    fedfuse::dataio::standardize(a, st);
    CHECK(a.at(0, 0, 0) == doctest::Approx((1.0 - 4.0) / std::sqrt(5.0)).epsilon(1e-6));
    CHECK(a.at(0, 0, 1) == 0.0f);
    CHECK(a.at(0, 1, 1) == 0.0f);

    Tensor bad({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    CHECK_THROWS_AS(fedfuse::dataio::standardize(bad, st), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::dataio::channel_stats({}), std::invalid_argument);
}

TEST_CASE("dataset files round trip bitwise") {
    SceneDataset ds = fedfuse::dataio::generate_synthetic(11, 16, 12, 4, 5, 2, 0.05);
    const std::string path = "dataio_test_roundtrip.fdsc";
    fedfuse::dataio::save_dataset(ds, path);
    SceneDataset back = fedfuse::dataio::load_dataset(path);
    CHECK(back.h == ds.h);
    CHECK(back.w == ds.w);
    CHECK(back.n_classes == ds.n_classes);
    CHECK(bitwise_equal(back.mod_a, ds.mod_a));
    CHECK(bitwise_equal(back.mod_b, ds.mod_b));
    CHECK(back.labels == ds.labels);
    std::remove(path.c_str());
}

TEST_CASE("hand-built file loads to the expected values") {
    // h=1 w=2 c_a=1 c_b=1 N=2; cubes [1.0, 2.5] and [-1.0, 0.5]; labels [0, 2].
    std::string blob = "FDSC1\n1 2 1 1 2\n";
    auto push = [&](std::uint32_t v) {
        blob.push_back(static_cast<char>(v & 0xff));
        blob.push_back(static_cast<char>((v >> 8) & 0xff));
        blob.push_back(static_cast<char>((v >> 16) & 0xff));
        blob.push_back(static_cast<char>((v >> 24) & 0xff));
    };
    push(0x3F800000);  // 1.0f
    push(0x40200000);  // 2.5f
    push(0xBF800000);  // -1.0f
    push(0x3F000000);  // 0.5f
    push(0);
    push(2);
    const std::string path = "dataio_test_fixture.fdsc";
    {
        std::ofstream out(path, std::ios::binary);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    }
    SceneDataset ds = fedfuse::dataio::load_dataset(path);
    CHECK(ds.h == 1);
    CHECK(ds.w == 2);
    CHECK(ds.n_classes == 2);
    CHECK(ds.mod_a[0] == 1.0f);
    CHECK(ds.mod_a[1] == 2.5f);
    CHECK(ds.mod_b[0] == -1.0f);
    CHECK(ds.mod_b[1] == 0.5f);
    CHECK(ds.labels == std::vector<std::uint32_t>{0, 2});
    std::remove(path.c_str());
}

TEST_CASE("malformed files are rejected with byte offsets") {
    SceneDataset ds = fedfuse::dataio::generate_synthetic(11, 16, 12, 4, 5, 2, 0.05);
    const std::string path = "dataio_test_bad.fdsc";
    fedfuse::dataio::save_dataset(ds, path);

    SUBCASE("truncation names expected and actual byte counts") {
        std::ifstream in(path, std::ios::binary);
        std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        in.close();
        blob.resize(blob.size() - 100);
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        out.close();
        CHECK_THROWS_WITH_AS(fedfuse::dataio::load_dataset(path), doctest::Contains("expected"),
                             std::runtime_error);
    }

    SUBCASE("bad magic is caught at offset zero") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "XDSC1\n1 1 1 1 1\n";
        out.close();
        CHECK_THROWS_WITH_AS(fedfuse::dataio::load_dataset(path), doctest::Contains("offset 0"),
                             std::runtime_error);
    }

    SUBCASE("out-of-range labels name their offset") {
        std::string blob = "FDSC1\n1 1 1 1 1\n";
        auto push = [&](std::uint32_t v) {
            for (int s = 0; s < 32; s += 8) {
                blob.push_back(static_cast<char>((v >> s) & 0xff));
            }
        };
        push(0x3F800000);
        push(0x3F800000);
        push(9);  // label 9 > N=1
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        out.close();
        CHECK_THROWS_WITH_AS(fedfuse::dataio::load_dataset(path),
                             doctest::Contains("out of range"), std::runtime_error);
    }

    SUBCASE("trailing bytes are rejected") {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        out << "junk";
        out.close();
        CHECK_THROWS_WITH_AS(fedfuse::dataio::load_dataset(path), doctest::Contains("trailing"),
                             std::runtime_error);
    }

    std::remove(path.c_str());
}

TEST_CASE("missing files are reported") {
    CHECK_THROWS_AS(fedfuse::dataio::load_dataset("no_such_file.fdsc"), std::runtime_error);
}
