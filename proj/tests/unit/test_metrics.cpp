#include "resproxy/common/random.hpp"
#include "resproxy/metrics/metrics.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

using namespace resproxy;
using namespace resproxy::metrics;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 100.0) {
    Matrix m(r, c);
    for (auto& v : m.values()) v = scale * rng.uniform();
    return m;
}

// Direct transcription of the metric with explicit loops.
std::vector<double> brute_force_error(const std::vector<Matrix>& pred,
                                      const std::vector<Matrix>& truth, std::size_t c0,
                                      std::size_t c1) {
    const std::size_t n = truth.size();
    auto cum = [](const Matrix& y, std::size_t t, std::size_t d) {
        double s = 0.0;
        for (std::size_t u = 0; u <= t; ++u) s += y(u, d);
        return s;
    };
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double sq = 0.0;
        for (std::size_t t = 0; t < truth[j].rows(); ++t)
            for (std::size_t d = c0; d < c1; ++d) sq += cum(truth[j], t, d) * cum(truth[j], t, d);
        denom += std::sqrt(sq);
    }
    denom /= static_cast<double>(n);
    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; ++k) {
        double sq = 0.0;
        for (std::size_t t = 0; t < truth[k].rows(); ++t)
            for (std::size_t d = c0; d < c1; ++d) {
                const double diff = cum(pred[k], t, d) - cum(truth[k], t, d);
                sq += diff * diff;
            }
        e[k] = std::sqrt(sq) / denom;
    }
    return e;
}

}  // namespace

TEST(Cumulative, PrefixSums) {
    Matrix y(3, 1);
    y(0, 0) = 1;
    y(1, 0) = 2;
    y(2, 0) = 3;
    const auto z = cumulative(y);
    EXPECT_EQ(z(0, 0), 1);
    EXPECT_EQ(z(1, 0), 3);
    EXPECT_EQ(z(2, 0), 6);
    EXPECT_EQ(cumulative(Matrix(4, 2)), Matrix(4, 2));
}

TEST(Cumulative, MatchesDoubleLoop) {
    Rng rng(1);
    const auto y = random_matrix(9, 5, rng);
    const auto z = cumulative(y);
    for (std::size_t d = 0; d < 5; ++d) {
        double s = 0.0;
        for (std::size_t t = 0; t < 9; ++t) {
            s += y(t, d);
            EXPECT_EQ(z(t, d), s);
        }
    }
}

TEST(SequenceError, HandExample) {
    Matrix y(2, 1, 1.0), p(2, 1, 1.0);
    p(1, 0) = 3.0;
    const std::vector<Matrix> pred{p}, truth{y};
    const auto e = relative_sequence_error(pred, truth, 0, 1);
    EXPECT_NEAR(e[0], 2.0 / std::sqrt(5.0), 1e-15);
}

TEST(SequenceError, MatchesBruteForceOnRandomRecords) {
    Rng rng(2);
    std::vector<Matrix> pred, truth;
    for (int k = 0; k < 20; ++k) {
        truth.push_back(random_matrix(12, 23, rng));
        pred.push_back(random_matrix(12, 23, rng));
    }
    for (auto [c0, c1] : {std::pair<std::size_t, std::size_t>{0, 23}, {0, 3}, {3, 23}, {1, 2}}) {
        const auto e = relative_sequence_error(pred, truth, c0, c1);
        const auto ref = brute_force_error(pred, truth, c0, c1);
        for (std::size_t k = 0; k < 20; ++k) EXPECT_NEAR(e[k], ref[k], 1e-10 * ref[k]);
    }
}

TEST(SequenceError, PerfectPredictionIsZeroAndScaleEquivariant) {
    Rng rng(3);
    std::vector<Matrix> pred, truth;
    for (int k = 0; k < 10; ++k) {
        truth.push_back(random_matrix(6, 3, rng));
        pred.push_back(random_matrix(6, 3, rng));
    }
    for (double e : relative_sequence_error(truth, truth, 0, 3)) EXPECT_EQ(e, 0.0);
    const auto base = relative_sequence_error(pred, truth, 0, 3);
    for (double c : {0.5, 3.0}) {
        auto sp = pred, st = truth;
        for (auto& m : sp)
            for (auto& v : m.values()) v *= c;
        for (auto& m : st)
            for (auto& v : m.values()) v *= c;
        const auto scaled = relative_sequence_error(sp, st, 0, 3);
        for (std::size_t k = 0; k < base.size(); ++k) EXPECT_NEAR(scaled[k], base[k], 1e-12);
    }
}

TEST(SequenceError, ZeroTruthRecordStaysFinite) {
    Rng rng(4);
    std::vector<Matrix> truth{Matrix(5, 3), random_matrix(5, 3, rng)};
    std::vector<Matrix> pred{random_matrix(5, 3, rng), random_matrix(5, 3, rng)};
    for (double e : relative_sequence_error(pred, truth, 0, 3)) EXPECT_TRUE(std::isfinite(e));
    std::vector<Matrix> zeros{Matrix(5, 3)};
    EXPECT_THROW(relative_sequence_error(std::vector<Matrix>{Matrix(5, 3, 1.0)}, zeros, 0, 3),
                 NumericError);
}

TEST(SequenceError, ShapeAndEmptyContracts) {
    std::vector<Matrix> none;
    EXPECT_THROW(relative_sequence_error(none, none, 0, 1), ContractError);
    std::vector<Matrix> a{Matrix(3, 2, 1.0)}, b{Matrix(4, 2, 1.0)};
    EXPECT_THROW(relative_sequence_error(a, b, 0, 2), ContractError);
}

TEST(Evaluate, GroupsAndMean) {
    Rng rng(5);
    std::vector<Matrix> pred, truth;
    for (int k = 0; k < 6; ++k) {
        truth.push_back(random_matrix(4, 23, rng));
        pred.push_back(random_matrix(4, 23, rng));
    }
    const auto r = evaluate(pred, truth);
    EXPECT_EQ(r.n, 6u);
    ASSERT_EQ(r.groups.size(), 3u);
    EXPECT_EQ(r.groups[0].name, "total");
    EXPECT_NEAR(r.mean, std::accumulate(r.errors.begin(), r.errors.end(), 0.0) / 6.0, 1e-15);
    for (double e : r.errors) EXPECT_GE(e, 0.0);
    const auto field = relative_sequence_error(pred, truth, 0, 3);
    EXPECT_EQ(r.group("field").errors, field);
    EXPECT_THROW((void)r.group("nope"), ContractError);
    EXPECT_EQ(r.per_step.size(), 4u);
    EXPECT_EQ(default_groups(3).size(), 1u);

    const auto csv = per_step_csv(r);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,total,field,wells");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
    const auto j = to_json(r);
    EXPECT_EQ(j["n"], 6);
}

TEST(PerStepError, ZeroForPerfectAndHandComputed) {
    Rng rng(6);
    std::vector<Matrix> truth{random_matrix(4, 3, rng)};
    for (double e : per_step_error(truth, truth, 0, 3)) EXPECT_EQ(e, 0.0);
    Matrix y(2, 2), p(2, 2);
    y(0, 0) = 3;
    y(0, 1) = 4;  // norm 5
    y(1, 0) = 1;
    p(0, 0) = 3;
    p(0, 1) = 1;  // diff 3
    p(1, 0) = 2;  // diff 1, denominator 1
    const auto e = per_step_error(std::vector<Matrix>{p}, std::vector<Matrix>{y}, 0, 2);
    EXPECT_NEAR(e[0], 3.0 / 5.0, 1e-15);
    EXPECT_NEAR(e[1], 1.0, 1e-15);
    Matrix zero(1, 1), one(1, 1, 1.0);
    EXPECT_EQ(per_step_error(std::vector<Matrix>{zero}, std::vector<Matrix>{zero}, 0, 1)[0], 0.0);
    EXPECT_TRUE(std::isinf(per_step_error(std::vector<Matrix>{one}, std::vector<Matrix>{zero}, 0, 1)[0]));
}

TEST(TTest, Conventions) {
    const std::vector<double> a{1, 2, 3, 4};
    const auto same = paired_t_test(a, a);
    EXPECT_EQ(same.t, 0.0);
    EXPECT_EQ(same.p, 1.0);
    const std::vector<double> b{0, 1, 2, 3};
    const auto shift = paired_t_test(a, b);
    EXPECT_TRUE(std::isinf(shift.t));
    EXPECT_EQ(shift.p, 0.0);
    EXPECT_THROW(paired_t_test(std::vector<double>{1}, std::vector<double>{2}), ContractError);
    EXPECT_THROW(paired_t_test(a, std::vector<double>{1, 2}), ContractError);
}

TEST(TTest, KnownValue) {
    // d = {1, 2, 3, 4, 5, 7}: mean 11/3, variance 14/3, df 5.
    const std::vector<double> a{1, 2, 3, 4, 5, 7}, b(6, 0.0);
    const auto r = paired_t_test(a, b);
    const double t = (11.0 / 3.0) / (std::sqrt(14.0 / 3.0) / std::sqrt(6.0));
    EXPECT_NEAR(r.t, t, 1e-12);
    EXPECT_EQ(r.df, 5u);
    // Two-sided p for t = 4.1576 at df = 5 (t-distribution tables): 0.0088446.
    EXPECT_NEAR(r.p, 0.0088445536, 1e-8);
}

TEST(TTest, AgreesWithPermutationOracle) {
    Rng rng(7);
    int agree = 0, trials = 0;
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> a(30), b(30);
        const double effect = 0.1 * (trial % 8);
        for (std::size_t i = 0; i < 30; ++i) {
            b[i] = rng.normal();
            a[i] = b[i] + effect + rng.normal();
        }
        const auto r = paired_t_test(a, b);
        // Sign-flip permutation test on the paired differences.
        std::vector<double> d(30);
        for (std::size_t i = 0; i < 30; ++i) d[i] = a[i] - b[i];
        const double obs = std::abs(std::accumulate(d.begin(), d.end(), 0.0));
        Rng perm(100 + static_cast<std::uint64_t>(trial));
        int extreme = 0;
        const int n_perm = 20000;
        for (int p = 0; p < n_perm; ++p) {
            double s = 0.0;
            for (double v : d) s += perm.bernoulli(0.5) ? v : -v;
            if (std::abs(s) >= obs) ++extreme;
        }
        const double p_perm = (extreme + 1.0) / (n_perm + 1.0);
        // Borderline cases at the threshold are not informative.
        if (std::abs(p_perm - 0.05) < 0.015) continue;
        ++trials;
        agree += (r.p < 0.05) == (p_perm < 0.05);
    }
    EXPECT_GE(trials, 20);
    EXPECT_EQ(agree, trials);
}

TEST(Npv, ZeroRatesAndOilOnly) {
    EXPECT_EQ(npv(Matrix(5, 3), NpvParams{}), 0.0);
    Rng rng(8);
    const auto rates = random_matrix(6, 3, rng);
    const auto cum = cumulative(rates);
    NpvParams p;
    p.oil_price = 1.0;
    p.water_price = 0.0;
    p.injection_price = 0.0;
    p.discount = 1.0;
    p.dt_days = 1.0;
    EXPECT_NEAR(npv(cum, p), cum(5, 0), 1e-9);
}

TEST(Npv, SpreadsheetOracle) {
    Rng rng(9);
    const auto rates = random_matrix(8, 3, rng);
    NpvParams p;
    p.discount = 0.97;
    double ref = 0.0;
    for (std::size_t t = 0; t < 8; ++t)
        ref += std::pow(0.97, static_cast<double>(t)) * 30.0 *
               (60.0 * rates(t, 0) - 5.0 * rates(t, 1) - 2.0 * rates(t, 2));
    EXPECT_NEAR(npv(cumulative(rates), p), ref, 1e-9 * std::abs(ref));
}

TEST(TimeRunner, CountsRunsWarmupsAndFailures) {
    std::vector<std::size_t> calls;
    const auto r = time_runner("fn", [&](std::size_t run) { calls.push_back(run); }, 10, 4, 2);
    EXPECT_EQ(calls.size(), 12u);
    EXPECT_EQ(r.n_runs, 10u);
    EXPECT_EQ(r.samples_ms.size(), 10u);
    EXPECT_EQ(r.failures, 0u);
    EXPECT_EQ(r.batch, 4u);
    EXPECT_LE(r.min_ms, r.mean_ms);
    EXPECT_LE(r.mean_ms, r.max_ms);
    const auto j = to_json(r);
    EXPECT_EQ(j["n_runs"], 10);

    int k = 0;
    const auto partial = time_runner("flaky", [&](std::size_t) {
        if (++k % 3 == 0) throw std::runtime_error("boom");
    }, 9, 1, 0);
    EXPECT_EQ(partial.failures, 3u);
    EXPECT_EQ(partial.samples_ms.size(), 6u);
}
