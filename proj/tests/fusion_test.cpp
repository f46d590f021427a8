#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedfuse/fusion.hpp"
#include "fedfuse/gradcheck.hpp"
#include "fedfuse/tape.hpp"
#include "fedfuse/tensor.hpp"
#include "oracles.hpp"

using fedfuse::autodiff::Tape;
using fedfuse::autodiff::Var;
using fedfuse::fusion::FusePair;
using fedfuse::fusion::FusionParams;
using fedfuse::fusion::FusionVars;
using fedfuse::fusion::LogitsBundle;
using fedfuse::numkit::Rng;
using fedfuse::numkit::Shape;
using fedfuse::numkit::Tensor;

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, float stddev = 1.0f) {
    Tensor t(shape);
    rng.fill_normal(t, stddev);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}

void set_identity(Tensor& m) {
    m.fill(0.0f);
    for (std::size_t i = 0; i < m.dim(0); ++i) {
        m.at(i, i) = 1.0f;
    }
}

FusionVars bind_tensors(Tape& t, const Tensor& cb, const Tensor& cd, const Tensor& cl) {
    FusionVars v;
    v.cb = t.leaf(cb);
    v.cd = t.leaf(cd);
    v.cl = t.leaf(cl);
    v.head_w = t.leaf(Tensor::zeros({cb.dim(1), 2}));
    v.head_b = t.leaf(Tensor::zeros({1, 2}));
    return v;
}

}  // namespace

TEST_CASE("fusion parameter validation") {
    FusionParams p(8, 8, 5, 0.75f);
    CHECK(p.in_channels() == 8);
    CHECK(p.out_channels() == 8);
    CHECK(p.classes() == 5);
    CHECK(p.head_w.shape() == Shape{8, 5});
    CHECK_THROWS_AS(FusionParams(0, 4, 3), std::invalid_argument);
    CHECK_THROWS_AS(FusionParams(4, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(FusionParams(4, 4, 3, 1.5f), std::invalid_argument);
    CHECK_THROWS_AS(FusionParams(4, 4, 3, -0.1f), std::invalid_argument);
}

TEST_CASE("zero gates with an identity base halve the cross term") {
    Rng rng(51);
    Tensor fh = random_tensor({3, 2, 4}, rng);
    Tensor fl = random_tensor({3, 2, 4}, rng);
    Tensor cb({4, 4}), cd = Tensor::zeros({4, 4}), cl = Tensor::zeros({4, 4});
    set_identity(cb);

    Tape t;
    FusionVars v = bind_tensors(t, cb, cd, cl);
    FusePair out = fedfuse::fusion::fuse(t, t.leaf(fh), t.leaf(fl), v);

    // sigmoid(0) = 1/2, so F1 = F2 = f_lidar / 2 + f_hsi.
    Tensor expect_half({3, 2, 4});
    Tensor expect_sum({3, 2, 4});
    for (std::size_t i = 0; i < fh.numel(); ++i) {
        expect_half[i] = 0.5f * fl[i] + fh[i];
        expect_sum[i] = fl[i] + 2.0f * fh[i];
    }
    CHECK(max_abs_diff(t.val(out.f1), expect_half) < 1e-6);
    CHECK(max_abs_diff(t.val(out.f2), expect_half) < 1e-6);
    CHECK(max_abs_diff(t.val(out.fused), expect_sum) < 1e-6);
}

TEST_CASE("zero second modality passes the base map through regardless of gates") {
    Rng rng(52);
    Tensor fh = random_tensor({2, 2, 3}, rng);
    Tensor fl = Tensor::zeros({2, 2, 3});
    Tensor cb({3, 3});
    set_identity(cb);
    Tensor cd = random_tensor({3, 3}, rng);
    Tensor cl = random_tensor({3, 3}, rng);

    Tape t;
    FusionVars v = bind_tensors(t, cb, cd, cl);
    FusePair out = fedfuse::fusion::fuse(t, t.leaf(fh), t.leaf(fl), v);
    Tensor expect({2, 2, 3});
    for (std::size_t i = 0; i < fh.numel(); ++i) {
        expect[i] = 2.0f * fh[i];
    }
    CHECK(max_abs_diff(t.val(out.fused), expect) == 0.0);
}

TEST_CASE("tied gate weights make both combinations identical") {
    Rng rng(53);
    Tensor fh = random_tensor({4, 5}, rng);
    Tensor fl = random_tensor({4, 5}, rng);
    Tensor cb = random_tensor({5, 5}, rng);
    Tensor tied = random_tensor({5, 5}, rng);

    Tape t;
    FusionVars v = bind_tensors(t, cb, tied, tied);
    FusePair out = fedfuse::fusion::fuse(t, t.leaf(fh), t.leaf(fl), v);
    CHECK(max_abs_diff(t.val(out.f1), t.val(out.f2)) == 0.0);
}

TEST_CASE("fuse rejects mismatched inputs") {
    Tape t;
    FusionVars v = bind_tensors(t, Tensor::zeros({3, 3}), Tensor::zeros({3, 3}),
                                Tensor::zeros({3, 3}));
    Var a = t.leaf(Tensor::zeros({2, 2, 3}));
    Var b = t.leaf(Tensor::zeros({2, 3, 3}));
    CHECK_THROWS_AS(fedfuse::fusion::fuse(t, a, b, v), std::invalid_argument);
    Var c = t.leaf(Tensor::zeros({2, 2, 4}));
    CHECK_THROWS_AS(fedfuse::fusion::fuse(t, c, c, v), std::invalid_argument);
    Var d = t.leaf(Tensor::zeros({12}));
    CHECK_THROWS_AS(fedfuse::fusion::fuse(t, d, d, v), std::invalid_argument);
}

TEST_CASE("fuse matches a double-precision reference") {
    Rng rng(54);
    Tensor fh = random_tensor({3, 4, 5}, rng);
    Tensor fl = random_tensor({3, 4, 5}, rng);
    Tensor cb = random_tensor({5, 6}, rng, 0.5f);
    Tensor cd = random_tensor({5, 6}, rng, 0.5f);
    Tensor cl = random_tensor({5, 6}, rng, 0.5f);

    Tape t;
    FusionVars v = bind_tensors(t, cb, cd, cl);
    FusePair out = fedfuse::fusion::fuse(t, t.leaf(fh), t.leaf(fl), v);
    REQUIRE(t.val(out.fused).shape() == Shape{3, 4, 5 == 5 ? 6 : 0});

    oracles::FuseRef ref = oracles::fuse(
        oracles::from_tensor2(fh.reshaped({12, 5})), oracles::from_tensor2(fl.reshaped({12, 5})),
        oracles::from_tensor2(cb), oracles::from_tensor2(cd), oracles::from_tensor2(cl));
    const Tensor& got = t.val(out.fused);
    for (std::size_t i = 0; i < 12; ++i) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(std::abs(static_cast<double>(got[i * 6 + j]) - ref.fused[i][j]) < 1e-5);
        }
    }
}

TEST_CASE("fuse gradients pass finite-difference checks") {
    Rng rng(55);
    std::vector<Tensor> leaves = {random_tensor({4, 3}, rng, 0.5f),
                                  random_tensor({4, 3}, rng, 0.5f),
                                  random_tensor({3, 3}, rng, 0.5f),
                                  random_tensor({3, 3}, rng, 0.5f),
                                  random_tensor({3, 3}, rng, 0.5f)};
    for (std::size_t wrt = 0; wrt < leaves.size(); ++wrt) {
        Tape t0;
        Var fh = t0.leaf(leaves[0]);
        Var fl = t0.leaf(leaves[1]);
        FusionVars v = bind_tensors(t0, leaves[2], leaves[3], leaves[4]);
        std::vector<Var> order = {fh, fl, v.cb, v.cd, v.cl};
        Var root = t0.sum(fedfuse::fusion::fuse(t0, fh, fl, v).fused);
        t0.backward(root);
        Tensor analytic = t0.grad(order[wrt]);

        auto f = [&](const Tensor& probe) {
            std::vector<Tensor> vals = leaves;
            vals[wrt] = probe;
            oracles::FuseRef ref = oracles::fuse(
                oracles::from_tensor2(vals[0]), oracles::from_tensor2(vals[1]),
                oracles::from_tensor2(vals[2]), oracles::from_tensor2(vals[3]),
                oracles::from_tensor2(vals[4]));
            double acc = 0.0;
            for (const auto& row : ref.fused) {
                for (double e : row) {
                    acc += e;
                }
            }
            return acc;
        };
        double err = fedfuse::autodiff::grad_check(f, leaves[wrt], analytic, 1e-3);
        CHECK(err < 1e-3);
    }
}

TEST_CASE("classifier head behaviour") {
    Rng rng(56);
    Tensor feat = random_tensor({3, 3, 4}, rng);

    SUBCASE("zero weights give the uniform distribution") {
        FusionParams p(4, 4, 5);
        Tape t;
        FusionVars v = fedfuse::fusion::bind_fusion(t, p);
        Var probs = fedfuse::fusion::classify(t, t.leaf(feat), v);
        const Tensor& y = t.val(probs);
        REQUIRE(y.shape() == Shape{1, 5});
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK(y[i] == doctest::Approx(0.2).epsilon(1e-6));
        }
    }

    SUBCASE("probabilities sum to one") {
        for (int c = 0; c < 10; ++c) {
            FusionParams p(4, 4, 3);
            rng.fill_normal(p.head_w);
            rng.fill_normal(p.head_b);
            Tensor f = random_tensor({2, 2, 4}, rng);
            Tape t;
            FusionVars v = fedfuse::fusion::bind_fusion(t, p);
            const Tensor& y = t.val(fedfuse::fusion::classify(t, t.leaf(f), v));
            double acc = 0.0;
            for (std::size_t i = 0; i < y.numel(); ++i) {
                CHECK(y[i] >= 0.0f);
                acc += static_cast<double>(y[i]);
            }
            CHECK(std::abs(acc - 1.0) < 1e-6);
        }
    }

    SUBCASE("argmax matches a pooled dense reference") {
        for (int c = 0; c < 20; ++c) {
            FusionParams p(4, 4, 6);
            rng.fill_normal(p.head_w);
            rng.fill_normal(p.head_b);
            Tensor f = random_tensor({3, 2, 4}, rng);
            Tape t;
            FusionVars v = fedfuse::fusion::bind_fusion(t, p);
            const Tensor& y = t.val(fedfuse::fusion::classify(t, t.leaf(f), v));

            oracles::Mat tokens = oracles::from_tensor2(f.reshaped({6, 4}));
            std::vector<double> bias(6);
            for (std::size_t i = 0; i < 6; ++i) {
                bias[i] = static_cast<double>(p.head_b[i]);
            }
            std::vector<double> ref =
                oracles::classify(tokens, oracles::from_tensor2(p.head_w), bias);
            std::size_t got_arg = 0, ref_arg = 0;
            for (std::size_t i = 1; i < 6; ++i) {
                if (y[i] > y[got_arg]) {
                    got_arg = i;
                }
                if (ref[i] > ref[ref_arg]) {
                    ref_arg = i;
                }
            }
            CHECK(got_arg == ref_arg);
        }
    }

    SUBCASE("pre-pooled rows take the same path") {
        FusionParams p(4, 4, 3);
        rng.fill_normal(p.head_w);
        Tape t;
        FusionVars v = fedfuse::fusion::bind_fusion(t, p);
        Var from_map = fedfuse::fusion::classify(t, t.leaf(feat), v);
        Var pooled = t.global_avg_pool(t.leaf(feat));
        Var from_row = fedfuse::fusion::classify(t, pooled, v);
        CHECK(max_abs_diff(t.val(from_map), t.val(from_row)) == 0.0);
        Var bad = t.leaf(Tensor::zeros({2, 4}));
        CHECK_THROWS_AS(fedfuse::fusion::classify(t, bad, v), std::invalid_argument);
    }
}

TEST_CASE("threshold decisions") {
    Tensor probs({2}, {0.6f, 0.4f});
    CHECK(fedfuse::fusion::threshold_map(probs, 0.5) == 1);
    CHECK(fedfuse::fusion::threshold_map(probs, 0.7) == 0);
    CHECK(fedfuse::fusion::threshold_map(probs, 0.0) == 1);
    CHECK(fedfuse::fusion::threshold_map(probs, 1.0) == 0);
    CHECK(fedfuse::fusion::threshold_map(probs, 0.6) == 1);  // boundary keeps the pixel

    Tensor sure({3}, {0.0f, 1.0f, 0.0f});
    CHECK(fedfuse::fusion::threshold_map(sure, 1.0) == 1);

    // Monotone in tau: raising the threshold never turns a 0 into a 1.
    Rng rng(57);
    for (int c = 0; c < 20; ++c) {
        Tensor z({4});
        rng.fill_normal(z);
        std::vector<double> sm = oracles::softmax({z[0], z[1], z[2], z[3]});
        Tensor pv({4});
        for (std::size_t i = 0; i < 4; ++i) {
            pv[i] = static_cast<float>(sm[i]);
        }
        int prev = 1;
        for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
            int cur = fedfuse::fusion::threshold_map(pv, tau);
            CHECK(cur <= prev);
            prev = cur;
        }
    }

    CHECK_THROWS_AS(fedfuse::fusion::threshold_map(probs, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::fusion::threshold_map(probs, 1.1), std::invalid_argument);
    CHECK_THROWS_AS(fedfuse::fusion::threshold_map(Tensor(), 0.5), std::invalid_argument);
}

TEST_CASE("loss hand-evaluated case") {
    Tape t;
    LogitsBundle b;
    b.fused = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    b.hsi = t.leaf(Tensor({1, 2}, {1.0f, 0.0f}));
    b.lidar = t.leaf(Tensor({1, 2}, {0.0f, 1.0f}));
    b.targets = {0};
    Var l = fedfuse::fusion::loss(t, b, {}, 0.0);
    CHECK(t.scalar(l) == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-9));
}

TEST_CASE("loss vanishes on a perfect, consistent prediction") {
    Tape t;
    LogitsBundle b;
    Tensor onehot({2, 3}, {1.0f, 0.0f, 0.0f, 0.0f, 0.0f, 1.0f});
    b.fused = t.leaf(onehot);
    b.hsi = t.leaf(onehot);
    b.lidar = t.leaf(onehot);
    b.targets = {0, 2};
    Var l = fedfuse::fusion::loss(t, b, {}, 0.0);
    CHECK(t.scalar(l) == 0.0);
}

TEST_CASE("weight-norm term scales with lambda") {
    Rng rng(58);
    Tensor w1 = random_tensor({3, 4}, rng);
    Tensor w2 = random_tensor({5}, rng);
    Tensor probs({1, 2}, {0.5f, 0.5f});

    auto eval = [&](double lambda, const std::vector<Tensor>& ws) {
        Tape t;
        LogitsBundle b;
        b.fused = t.leaf(probs);
        b.hsi = t.leaf(probs);
        b.lidar = t.leaf(probs);
        b.targets = {0};
        std::vector<Var> reg;
        for (const Tensor& w : ws) {
            reg.push_back(t.leaf(w));
        }
        return t.scalar(fedfuse::fusion::loss(t, b, reg, lambda));
    };

    double base = eval(0.0, {w1, w2});
    CHECK(eval(0.5, {Tensor::zeros({3, 3})}) == doctest::Approx(base).epsilon(1e-12));

    double n1 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < w1.numel(); ++i) {
        n1 += static_cast<double>(w1[i]) * static_cast<double>(w1[i]);
    }
    for (std::size_t i = 0; i < w2.numel(); ++i) {
        n2 += static_cast<double>(w2[i]) * static_cast<double>(w2[i]);
    }
    double expect = std::sqrt(n1) + std::sqrt(n2);
    CHECK(eval(0.25, {w1, w2}) - base == doctest::Approx(0.25 * expect).epsilon(1e-6));
}

TEST_CASE("loss is nonnegative on simplex inputs") {
    Rng rng(59);
    for (int c = 0; c < 20; ++c) {
        std::size_t n = 3, classes = 4;
        auto sample = [&]() {
            Tensor m({n, classes});
            for (std::size_t i = 0; i < n; ++i) {
                Tensor z({classes});
                rng.fill_normal(z);
                std::vector<double> sm = oracles::softmax({z[0], z[1], z[2], z[3]});
                for (std::size_t j = 0; j < classes; ++j) {
                    m.at(i, j) = static_cast<float>(sm[j]);
                }
            }
            return m;
        };
        Tape t;
        LogitsBundle b;
        b.fused = t.leaf(sample());
        b.hsi = t.leaf(sample());
        b.lidar = t.leaf(sample());
        b.targets = {rng.below(classes), rng.below(classes), rng.below(classes)};
        std::vector<Var> reg = {t.leaf(random_tensor({2, 2}, rng))};
        CHECK(t.scalar(fedfuse::fusion::loss(t, b, reg, 1e-4)) >= 0.0);
    }
}

TEST_CASE("loss input validation") {
    Tape t;
    LogitsBundle b;
    b.fused = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    b.hsi = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    b.lidar = t.leaf(Tensor({1, 3}, {0.4f, 0.3f, 0.3f}));
    b.targets = {0};
    CHECK_THROWS_AS(fedfuse::fusion::loss(t, b, {}, 0.0), std::invalid_argument);

    b.lidar = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    b.targets = {0, 1};
    CHECK_THROWS_AS(fedfuse::fusion::loss(t, b, {}, 0.0), std::invalid_argument);
    b.targets = {0};
    CHECK_THROWS_AS(fedfuse::fusion::loss(t, b, {}, -1.0), std::invalid_argument);

    LogitsBundle bad;
    bad.fused = t.leaf(Tensor({1, 2}, {0.9f, 0.4f}));
    bad.hsi = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    bad.lidar = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    bad.targets = {0};
    CHECK_THROWS_AS(fedfuse::fusion::loss(t, bad, {}, 0.0), std::invalid_argument);

    LogitsBundle neg;
    neg.fused = t.leaf(Tensor({1, 2}, {1.2f, -0.2f}));
    neg.hsi = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    neg.lidar = t.leaf(Tensor({1, 2}, {0.5f, 0.5f}));
    neg.targets = {0};
    CHECK_THROWS_AS(fedfuse::fusion::loss(t, neg, {}, 0.0), std::invalid_argument);
}

TEST_CASE("loss gradients flow through the softmax outputs") {
    Rng rng(60);
    std::size_t n = 4, classes = 3;
    std::vector<Tensor> leaves = {random_tensor({n, classes}, rng),
                                  random_tensor({n, classes}, rng),
                                  random_tensor({n, classes}, rng),
                                  random_tensor({2, 3}, rng)};
    std::vector<std::size_t> targets = {0, 2, 1, 1};
    double lambda = 0.1;

    auto reference = [&](const std::vector<Tensor>& vals) {
        oracles::Mat of, o1, o2;
        for (std::size_t i = 0; i < n; ++i) {
            auto row = [&](const Tensor& m) {
                std::vector<double> z(classes);
                for (std::size_t j = 0; j < classes; ++j) {
                    z[j] = static_cast<double>(m.at(i, j));
                }
                return oracles::softmax(z);
            };
            of.push_back(row(vals[0]));
            o1.push_back(row(vals[1]));
            o2.push_back(row(vals[2]));
        }
        return oracles::loss(of, o1, o2, targets, {vals[3]}, lambda);
    };

    for (std::size_t wrt = 0; wrt < leaves.size(); ++wrt) {
        Tape t0;
        std::vector<Var> logits;
        for (std::size_t i = 0; i < 3; ++i) {
            logits.push_back(t0.leaf(leaves[i]));
        }
        Var wreg = t0.leaf(leaves[3]);
        LogitsBundle b;
        b.fused = t0.softmax_rows(logits[0]);
        b.hsi = t0.softmax_rows(logits[1]);
        b.lidar = t0.softmax_rows(logits[2]);
        b.targets = targets;
        Var root = fedfuse::fusion::loss(t0, b, {wreg}, lambda);
        t0.backward(root);
        std::vector<Var> order = {logits[0], logits[1], logits[2], wreg};
        Tensor analytic = t0.grad(order[wrt]);

        auto f = [&](const Tensor& probe) {
            std::vector<Tensor> vals = leaves;
            vals[wrt] = probe;
            return reference(vals);
        };
        double err = fedfuse::autodiff::grad_check(f, leaves[wrt], analytic, 1e-3);
        CHECK(err < 1e-3);
    }
}
