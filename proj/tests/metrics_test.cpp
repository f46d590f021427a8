#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include "fedfuse/metrics.hpp"
#include "fedfuse/tensor.hpp"

using fedfuse::metrics::ConfusionMatrix;
using fedfuse::metrics::Scores;
using fedfuse::numkit::Rng;

namespace {

// Brute-force indicators straight from the pair lists, no matrix involved.
struct RefScores {
    double oa, aa, kappa;
    std::vector<double> ca;
    std::vector<bool> defined;
};

RefScores recount(const std::vector<std::size_t>& preds, const std::vector<std::size_t>& truths,
                  std::size_t classes) {
    double n = static_cast<double>(preds.size());
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == truths[i]) {
            ++correct;
        }
    }
    RefScores r;
    r.oa = correct / n;
    r.ca.assign(classes, 0.0);
    r.defined.assign(classes, false);
    double ca_sum = 0.0;
    std::size_t ca_n = 0;
    double pe = 0.0;
    for (std::size_t c = 1; c <= classes; ++c) {
        std::size_t actual = 0, hit = 0, predicted = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (truths[i] == c) {
                ++actual;
                if (preds[i] == c) {
                    ++hit;
                }
            }
            if (preds[i] == c) {
                ++predicted;
            }
        }
        if (actual > 0) {
            r.ca[c - 1] = static_cast<double>(hit) / actual;
            r.defined[c - 1] = true;
            ca_sum += r.ca[c - 1];
            ++ca_n;
        }
        pe += static_cast<double>(actual) * static_cast<double>(predicted) / (n * n);
    }
    r.aa = ca_sum / static_cast<double>(ca_n);
    r.kappa = pe == 1.0 ? 1.0 : (r.oa - pe) / (1.0 - pe);
    return r;
}

}  // namespace

TEST_CASE("construction and accumulation basics") {
    CHECK_THROWS_AS(ConfusionMatrix(0), std::invalid_argument);

    ConfusionMatrix m(3);
    m.accumulate({}, {});
    CHECK(m.total() == 0);
    CHECK_THROWS_AS(fedfuse::metrics::scores(m), std::invalid_argument);

    m.accumulate({1, 2, 3}, {1, 2, 3});
    CHECK(m.total() == 3);
    CHECK(m.trace() == 3);
    Scores s = fedfuse::metrics::scores(m);
    CHECK(s.oa == 1.0);
    CHECK(s.aa == 1.0);
    CHECK(s.kappa == 1.0);
}

TEST_CASE("hand-evaluated two-class matrix") {
    ConfusionMatrix m(2);
    // Rows are the actual class: [[2, 0], [1, 1]].
    m.accumulate({1, 1, 1, 2}, {1, 1, 2, 2});
    CHECK(m.count(1, 1) == 2);
    CHECK(m.count(1, 2) == 0);
    CHECK(m.count(2, 1) == 1);
    CHECK(m.count(2, 2) == 1);

    Scores s = fedfuse::metrics::scores(m);
    CHECK(s.oa == 0.75);
    REQUIRE(s.ca[0].has_value());
    REQUIRE(s.ca[1].has_value());
    CHECK(*s.ca[0] == 1.0);
    CHECK(*s.ca[1] == 0.5);
    CHECK(s.aa == 0.75);
    CHECK(s.kappa == 0.5);
}

TEST_CASE("constant predictor on balanced data scores zero kappa") {
    ConfusionMatrix m(2);
    m.accumulate({1, 1, 1, 1}, {1, 2, 1, 2});
    Scores s = fedfuse::metrics::scores(m);
    CHECK(s.oa == 0.5);
    CHECK(s.kappa == 0.0);
}

TEST_CASE("single diagonal cell scores kappa one") {
    ConfusionMatrix m(2);
    m.accumulate({1, 1}, {1, 1});
    Scores s = fedfuse::metrics::scores(m);
    CHECK(s.oa == 1.0);
    CHECK(s.kappa == 1.0);
}

TEST_CASE("absent classes are excluded from the average") {
    ConfusionMatrix m(3);
    m.accumulate({1, 2, 2, 1}, {1, 2, 1, 1});
    Scores s = fedfuse::metrics::scores(m);
    CHECK_FALSE(s.ca[2].has_value());
    REQUIRE(s.ca[0].has_value());
    REQUIRE(s.ca[1].has_value());
    CHECK(s.aa == doctest::Approx((*s.ca[0] + *s.ca[1]) / 2.0).epsilon(1e-12));
}

TEST_CASE("rejections carry the offending position and change nothing") {
    ConfusionMatrix m(2);
    m.accumulate({1}, {1});
    CHECK_THROWS_WITH_AS(m.accumulate({1, 3}, {1, 1}), doctest::Contains("position 1"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(m.accumulate({0}, {1}), doctest::Contains("position 0"),
                         std::invalid_argument);
    CHECK(m.total() == 1);  // failed batches must not half-apply
    CHECK_THROWS_AS(m.accumulate({1, 2}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(m.count(3, 1), std::invalid_argument);

    ConfusionMatrix other(3);
    CHECK_THROWS_AS(m.merge(other), std::invalid_argument);
}

TEST_CASE("concatenated batches equal merged partial matrices") {
    Rng rng(71);
    for (int round = 0; round < 10; ++round) {
        std::size_t classes = 2 + rng.below(5);
        auto draw = [&](std::size_t n) {
            std::vector<std::size_t> v(n);
            for (auto& e : v) {
                e = 1 + rng.below(classes);
            }
            return v;
        };
        std::vector<std::size_t> p1 = draw(40), t1 = draw(40), p2 = draw(25), t2 = draw(25);

        ConfusionMatrix a(classes), b(classes), whole(classes);
        a.accumulate(p1, t1);
        b.accumulate(p2, t2);
        a.merge(b);

        std::vector<std::size_t> pc = p1, tc = t1;
        pc.insert(pc.end(), p2.begin(), p2.end());
        tc.insert(tc.end(), t2.begin(), t2.end());
        whole.accumulate(pc, tc);

        for (std::size_t i = 1; i <= classes; ++i) {
            for (std::size_t j = 1; j <= classes; ++j) {
                CHECK(a.count(i, j) == whole.count(i, j));
            }
        }
    }
}

TEST_CASE("scores agree with a raw recount on random instances") {
    Rng rng(72);
    for (int round = 0; round < 100; ++round) {
        std::size_t classes = 2 + rng.below(6);
        std::size_t n = 1 + rng.below(200);
        std::vector<std::size_t> preds(n), truths(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = 1 + rng.below(classes);
            truths[i] = 1 + rng.below(classes);
        }
        ConfusionMatrix m(classes);
        m.accumulate(preds, truths);
        Scores s = fedfuse::metrics::scores(m);
        RefScores r = recount(preds, truths, classes);

        CHECK(s.oa == doctest::Approx(r.oa).epsilon(1e-12));
        CHECK(s.aa == doctest::Approx(r.aa).epsilon(1e-12));
        CHECK(s.kappa == doctest::Approx(r.kappa).epsilon(1e-12));
        for (std::size_t c = 0; c < classes; ++c) {
            CHECK(s.ca[c].has_value() == r.defined[c]);
            if (r.defined[c]) {
                CHECK(*s.ca[c] == doctest::Approx(r.ca[c]).epsilon(1e-12));
            }
        }
        CHECK(s.oa >= 0.0);
        CHECK(s.oa <= 1.0);
        CHECK(s.aa >= 0.0);
        CHECK(s.aa <= 1.0);
        CHECK(s.kappa <= s.oa + 1e-12);
    }
}

TEST_CASE("consistent relabeling leaves the indicators unchanged") {
    Rng rng(73);
    std::size_t classes = 5, n = 120;
    std::vector<std::size_t> preds(n), truths(n);
    for (std::size_t i = 0; i < n; ++i) {
        preds[i] = 1 + rng.below(classes);
        truths[i] = 1 + rng.below(classes);
    }
    std::vector<std::size_t> perm = {3, 5, 1, 4, 2};  // new id of class i+1
    std::vector<std::size_t> pp(n), tp(n);
    for (std::size_t i = 0; i < n; ++i) {
        pp[i] = perm[preds[i] - 1];
        tp[i] = perm[truths[i] - 1];
    }
    ConfusionMatrix a(classes), b(classes);
    a.accumulate(preds, truths);
    b.accumulate(pp, tp);
    Scores sa = fedfuse::metrics::scores(a);
    Scores sb = fedfuse::metrics::scores(b);
    CHECK(sa.oa == doctest::Approx(sb.oa).epsilon(1e-12));
    CHECK(sa.aa == doctest::Approx(sb.aa).epsilon(1e-12));
    CHECK(sa.kappa == doctest::Approx(sb.kappa).epsilon(1e-12));
}

TEST_CASE("reports carry the same numbers") {
    ConfusionMatrix m(2);
    m.accumulate({1, 1, 1, 2}, {1, 1, 2, 2});

    std::string text = fedfuse::metrics::report_text(m);
    CHECK(text.find("overall accuracy") != std::string::npos);
    CHECK(text.find("kappa") != std::string::npos);
    CHECK(text.find("0.7500") != std::string::npos);

    nlohmann::json doc = nlohmann::json::parse(fedfuse::metrics::report_json(m));
    CHECK(doc["oa"].get<double>() == 0.75);
    CHECK(doc["aa"].get<double>() == 0.75);
    CHECK(doc["kappa"].get<double>() == 0.5);
    REQUIRE(doc["classes"].size() == 2);
    CHECK(doc["classes"][0]["accuracy"].get<double>() == 1.0);
    CHECK(doc["classes"][1]["samples"].get<int>() == 2);
}
