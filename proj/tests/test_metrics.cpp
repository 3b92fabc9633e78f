#include <cmath>
#include <numeric>

#include "doctest.h"
#include "sotk/common/error.hpp"
#include "sotk/common/rng.hpp"
#include "sotk/metrics/metrics.hpp"

using namespace sotk;
using namespace sotk::metrics;

namespace {

// Metrics straight from an N x N confusion matrix M[true][pred].
struct Oracle {
    std::vector<std::vector<std::uint64_t>> m;
    std::vector<double> w;
    bool per_instance = false;  // Uniform mode: every instance weighs the same

    double row(std::size_t i) const { return std::accumulate(m[i].begin(), m[i].end(), 0.0); }
    double col(std::size_t j) const {
        double s = 0;
        for (const auto& r : m) {
            s += static_cast<double>(r[j]);
        }
        return s;
    }
    double acc() const {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (row(i) > 0) {
                num += w[i] * static_cast<double>(m[i][i]) / row(i);
                den += w[i];
            }
        }
        return num / den;
    }
    double rec() const {
        if (per_instance) {
            double tp = 0, n = 0;
            for (std::size_t i = 0; i < m.size(); ++i) {
                tp += static_cast<double>(m[i][i]);
                n += row(i);
            }
            return tp / n;
        }
        double num = 0, den = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            num += w[i] * static_cast<double>(m[i][i]);
            den += w[i] * row(i);
        }
        return num / den;
    }
    double f1w() const {
        double num = 0, den = 0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double tp = static_cast<double>(m[i][i]);
            const double p = col(i) > 0 ? tp / col(i) : 0.0;
            const double r = row(i) > 0 ? tp / row(i) : 0.0;
            const double f = (p + r) > 0 ? 2 * p * r / (p + r) : 0.0;
            const double wi = per_instance ? 1.0 : w[i];
            num += wi * f * row(i);
            den += wi * row(i);
        }
        return num / den;
    }
};

void expand(const std::vector<std::vector<std::uint64_t>>& m, std::vector<int>& t, std::vector<int>& p) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        for (std::size_t j = 0; j < m.size(); ++j) {
            for (std::uint64_t k = 0; k < m[i][j]; ++k) {
                t.push_back(static_cast<int>(i));
                p.push_back(static_cast<int>(j));
            }
        }
    }
}

}  // namespace

TEST_CASE("confusion counts") {
    const std::vector<int> t = {1, 1, 0, 0}, p = {1, 0, 0, 0};
    const auto s = confusion(t, p, 2);
    CHECK(s.tp == std::vector<std::uint64_t>{2, 1});
    CHECK(s.ap == std::vector<std::uint64_t>{2, 2});
    CHECK(s.pp == std::vector<std::uint64_t>{3, 1});
    CHECK(s.n == 4);
    const auto empty = confusion({}, {}, 3);
    CHECK(empty.n == 0);
    CHECK(empty.tp == std::vector<std::uint64_t>{0, 0, 0});
    CHECK_THROWS_AS(confusion(t, std::vector<int>{1}, 2), InvalidArgument);
    CHECK_THROWS_AS(confusion(std::vector<int>{2}, std::vector<int>{0}, 2), InvalidArgument);
}

TEST_CASE("class weights") {
    const std::vector<std::uint64_t> skewed = {90, 10};
    const auto inv = class_weights(skewed, WeightMode::InverseFrequency);
    CHECK(inv.w[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(inv.w[1] == doctest::Approx(0.9).epsilon(1e-12));
    const std::vector<std::uint64_t> even = {50, 50};
    for (auto mode : {WeightMode::InverseFrequency, WeightMode::Balanced, WeightMode::Uniform}) {
        const auto w = class_weights(even, mode);
        CHECK(w.w[0] == doctest::Approx(0.5));
        CHECK(w.w[1] == doctest::Approx(0.5));
    }
    try {
        class_weights(std::vector<std::uint64_t>{1, 0}, WeightMode::InverseFrequency);
        FAIL("zero-count class accepted");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("class 1") != std::string::npos);
    }
    CHECK(parse_mode("balanced") == WeightMode::Balanced);
    CHECK_THROWS_AS(parse_mode("macro"), InvalidArgument);
}

TEST_CASE("worked example with equal weights") {
    const std::vector<int> t = {1, 1, 0, 0}, p = {1, 0, 0, 0};
    const auto s = confusion(t, p, 2);
    const ClassWeights eq{WeightMode::Balanced, {0.5, 0.5}};
    CHECK(weighted_accuracy(s, eq) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(weighted_recall(s, eq) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(weighted_f1(s, eq) == doctest::Approx(0.8 / 2 + (2.0 / 3.0) / 2).epsilon(1e-15));
    CHECK(std::abs(weighted_f1(s, eq) - 0.7333333333333333) < 1e-12);
}

TEST_CASE("inverse-frequency accuracy penalizes the majority-class predictor") {
    std::vector<int> t(100, 0), p(100, 0);
    std::fill(t.begin() + 90, t.end(), 1);
    const auto s = confusion(t, p, 2);
    const auto w = class_weights(s.ap, WeightMode::InverseFrequency);
    CHECK(weighted_accuracy(s, w) == doctest::Approx(0.1).epsilon(1e-12));
    // Literal form: (100/90)*1 + (100/10)*0.
    CHECK(weighted_accuracy_unnormalized(s) == doctest::Approx(100.0 / 90.0));
}

TEST_CASE("absent classes are renormalized away; all-absent is an error") {
    const std::vector<int> t = {0, 0, 1}, p = {0, 2, 1};
    const auto s = confusion(t, p, 3);
    const ClassWeights w{WeightMode::Balanced, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    CHECK(weighted_accuracy(s, w) == doctest::Approx(0.75));
    const auto empty = confusion({}, {}, 2);
    CHECK_THROWS_AS(weighted_accuracy(empty, ClassWeights{WeightMode::Balanced, {0.5, 0.5}}), DataError);
    CHECK_THROWS_AS(weighted_recall(empty, ClassWeights{WeightMode::Balanced, {0.5, 0.5}}), DataError);
    CHECK_THROWS_AS(weighted_f1(s, ClassWeights{WeightMode::Balanced, {0.5, 0.5}}), InvalidArgument);
}

TEST_CASE("property: random confusion tables match the matrix oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.below(5);
        Oracle o;
        o.m.assign(n, std::vector<std::uint64_t>(n, 0));
        for (auto& r : o.m) {
            for (auto& x : r) {
                x = rng.below(4) == 0 ? 0 : rng.below(30);
            }
        }
        o.m[0][0] += 1;  // at least one supported class
        std::vector<int> t, p;
        expand(o.m, t, p);
        const auto s = confusion(t, p, n);
        for (auto mode : {WeightMode::Balanced, WeightMode::Uniform}) {
            const auto w = class_weights(s.ap, mode);
            o.w = w.w;
            o.per_instance = mode == WeightMode::Uniform;
            CHECK(std::abs(weighted_accuracy(s, w) - o.acc()) < 1e-12);
            CHECK(std::abs(weighted_recall(s, w) - o.rec()) < 1e-12);
            CHECK(std::abs(weighted_f1(s, w) - o.f1w()) < 1e-12);
            for (double v : {weighted_accuracy(s, w), weighted_recall(s, w), weighted_f1(s, w)}) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0 + 1e-15);
            }
        }
        // Uniform-weight recall is micro accuracy.
        const auto uni = class_weights(s.ap, WeightMode::Uniform);
        const double micro = static_cast<double>(std::accumulate(s.tp.begin(), s.tp.end(), std::uint64_t{0})) /
                             static_cast<double>(s.n);
        CHECK(std::abs(weighted_recall(s, uni) - micro) < 1e-12);

        // Relabeling classes with the weights permuted alongside.
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        rng.shuffle(std::span<std::size_t>(perm));
        std::vector<int> t2, p2;
        for (std::size_t i = 0; i < t.size(); ++i) {
            t2.push_back(static_cast<int>(perm[static_cast<std::size_t>(t[i])]));
            p2.push_back(static_cast<int>(perm[static_cast<std::size_t>(p[i])]));
        }
        const auto s2 = confusion(t2, p2, n);
        const auto bal = class_weights(s.ap, WeightMode::Balanced);
        ClassWeights bal2 = bal;
        for (std::size_t c = 0; c < n; ++c) {
            bal2.w[perm[c]] = bal.w[c];
        }
        CHECK(std::abs(weighted_f1(s, bal) - weighted_f1(s2, bal2)) < 1e-12);
        CHECK(std::abs(weighted_accuracy(s, bal) - weighted_accuracy(s2, bal2)) < 1e-12);
    }
}

TEST_CASE("perfect predictions score 1 under every mode") {
    Rng rng(8);
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        y.push_back(static_cast<int>(rng.below(4)));
    }
    for (auto mode : {WeightMode::InverseFrequency, WeightMode::Balanced, WeightMode::Uniform}) {
        const auto r = evaluate(y, y, 4, mode);
        CHECK(r.weighted_accuracy == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(r.weighted_recall == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(r.weighted_f1 == doctest::Approx(1.0).epsilon(1e-15));
    }
    const auto report = evaluate(y, y, 5).to_json();
    CHECK(report.find("\"weighted_f1\":1.0") != std::string::npos);
}
