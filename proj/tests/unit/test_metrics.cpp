#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "climcast/metrics.hpp"
#include "oracles/metric_oracles.hpp"

using namespace climcast;

TEST(Metrics, HandCases) {
    const std::vector<double> y{1, 2, 3}, p{1, 2, 5};
    EXPECT_DOUBLE_EQ(mse(y, p), 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(r2(y, p), 1.0 - 4.0 / 2.0);
    EXPECT_EQ(mare(y, p), 2.0 / 6.0);
    EXPECT_EQ(r2(y, std::vector<double>{1, 2, 4}), 0.5);
    EXPECT_EQ(mare(std::vector<double>{2, 2}, std::vector<double>{3, 1}), 0.5);
    EXPECT_EQ(mare(std::vector<double>{0, 0}, std::vector<double>{0, 0}), 0.0);
    EXPECT_EQ(r2(y, y), 1.0);
    EXPECT_EQ(mse(y, y), 0.0);
}

TEST(Metrics, RatioOfSumsDiffersFromMeanOfRatios) {
    // A mean of per-point ratios would blow up on the near-zero week; the ratio of sums does not.
    const std::vector<double> y{1e-6, 10, 10}, p{1.0, 10, 10};
    EXPECT_NEAR(mare(y, p), (1.0 - 1e-6) / 20.000001, 1e-12);
}

TEST(Metrics, InputErrors) {
    const std::vector<double> a{1, 2}, b{1};
    EXPECT_THROW(mse(a, b), InvalidArgument);
    EXPECT_THROW(r2(std::vector<double>{1}, std::vector<double>{1}), InvalidArgument);
    EXPECT_THROW(r2(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
    EXPECT_THROW(mare(std::vector<double>{-1, 2}, a), InvalidArgument);
}

TEST(Metrics, MatchOraclesOnRandomFixtures) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int f = 0; f < 100; ++f) {
        const std::size_t len = 2 + rng() % 200;
        std::vector<double> y(len), p(len);
        for (std::size_t i = 0; i < len; ++i) {
            y[i] = u(rng);
            p[i] = y[i] + n(rng);
        }
        EXPECT_NEAR(mse(y, p), oracle::mse(y, p), 1e-12 * std::max(1.0, oracle::mse(y, p)));
        EXPECT_NEAR(r2(y, p), oracle::r2(y, p), 1e-12);
        EXPECT_NEAR(mare(y, p), oracle::mare(y, p), 1e-12);
    }
}

TEST(Metrics, Invariances) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 10.0);
    std::vector<double> y(40), p(40), ys(40), ps(40);
    for (std::size_t i = 0; i < 40; ++i) {
        y[i] = u(rng);
        p[i] = u(rng);
        ys[i] = 4.0 * y[i];
        ps[i] = 4.0 * p[i];
    }
    // R2 and MARE are scale-free; MSE scales with the square.
    EXPECT_NEAR(r2(ys, ps), r2(y, p), 1e-12);
    EXPECT_NEAR(mare(ys, ps), mare(y, p), 1e-9);
    EXPECT_NEAR(mse(ys, ps), 16.0 * mse(y, p), 1e-9);
}

TEST(Cog, SingleWeekMassSitsOnThatWeek) {
    const std::vector<int> w{8, 9, 10, 11, 12};
    const std::vector<double> v{0, 0, 5, 0, 0};
    EXPECT_DOUBLE_EQ(cog(w, v), 10.0);
}

TEST(Cog, WrapsAcrossTheYearBoundary) {
    const std::vector<int> w{50, 2};
    const std::vector<double> v{1, 1};
    EXPECT_DOUBLE_EQ(cog(w, v), 52.0);
    EXPECT_EQ(cog_error(51.0, 1.0), 2.0);
    EXPECT_EQ(cog_error(10.0, 36.0), 26.0);
}

TEST(Cog, FourWeekShiftGivesExactlyFourWeeks) {
    std::vector<int> w;
    std::vector<double> y, p;
    for (int k = 1; k <= 52; ++k) w.push_back(k);
    auto bump = [](int k, int centre) {
        const double d = std::min(std::abs(k - centre), 52 - std::abs(k - centre));
        return 100.0 * std::exp(-d * d / 18.0) + 1.0;
    };
    for (int k = 1; k <= 52; ++k) {
        y.push_back(bump(k, 6));
        p.push_back(bump(k, 10));
    }
    EXPECT_EQ(cog_error(cog(w, y), cog(w, p)), 4.0);
}

TEST(Cog, MatchesComplexOracle) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int f = 0; f < 100; ++f) {
        std::vector<int> w;
        std::vector<double> v;
        for (int k = 1; k <= 52; ++k)
            if (u(rng) < 0.6) {
                w.push_back(k);
                v.push_back(u(rng) * (k < 20 ? 10.0 : 1.0));
            }
        if (w.empty()) continue;
        const double got = cog(w, v), want = oracle::cog(w, v);
        EXPECT_LE(cog_error(got, want), 1e-8) << got << " vs " << want;
        EXPECT_GT(got, 0.0);
        EXPECT_LE(got, 52.0);
    }
}

TEST(Cog, Errors) {
    EXPECT_THROW(cog(std::vector<int>{1, 2}, std::vector<double>{0, 0}), InvalidArgument);
    EXPECT_THROW(cog(std::vector<int>{1, 2}, std::vector<double>{1, -1}), InvalidArgument);
    EXPECT_THROW(cog(std::vector<int>{1}, std::vector<double>{1, 2}), InvalidArgument);
}

TEST(SeasonalTiming, SplitsAtWeek27AndSkipsShortSeasons) {
    EXPECT_EQ(season_of({2020, 27}), 2020);
    EXPECT_EQ(season_of({2021, 26}), 2020);
    std::vector<EpiWeek> when;
    std::vector<double> y;
    EpiWeek w{2020, 27};
    for (int i = 0; i < 62; ++i) {
        when.push_back(w);
        y.push_back(1.0 + (w.week == 5 ? 50.0 : 0.0));
        w = w.next();
    }
    const auto t = seasonal_timing(when, y, y);
    ASSERT_EQ(t.size(), 1u);  // the 10 weeks of season 2021 are too few
    EXPECT_EQ(t[0].season, 2020);
    EXPECT_EQ(t[0].weeks, 52u);
    EXPECT_EQ(t[0].error, 0.0);
}

TEST(Bootstrap, MatchesIndependentResampler) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (std::size_t n : {2u, 5u, 17u}) {
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = u(rng);
            b[i] = u(rng);
        }
        for (bool lower : {true, false}) {
            const auto s = bootstrap_compare(a, b, 2000, 99, lower ? Better::Lower : Better::Higher);
            const auto r = oracle::bootstrap(a, b, 2000, 99, lower);
            ASSERT_EQ(s.deltas.size(), r.deltas.size());
            for (std::size_t i = 0; i < r.deltas.size(); ++i) ASSERT_EQ(s.deltas[i], r.deltas[i]);
            EXPECT_NEAR(s.delta_mean, r.mean, 1e-12);
            EXPECT_NEAR(s.delta_ci_lo, r.lo, 1e-12);
            EXPECT_NEAR(s.delta_ci_hi, r.hi, 1e-12);
            EXPECT_NEAR(s.signed_log_mean, r.slog_mean, 1e-12);
            EXPECT_NEAR(s.signed_log_ci_lo, r.slog_lo, 1e-12);
            EXPECT_NEAR(s.signed_log_ci_hi, r.slog_hi, 1e-12);
            EXPECT_NEAR(s.win_probability, r.win, 1e-12);
        }
    }
}

TEST(Bootstrap, IdenticalModelsTieAtOneHalf) {
    const std::vector<double> a{0.2, 0.3, 0.5};
    const auto s = bootstrap_compare(a, a, 500, 1);
    EXPECT_EQ(s.win_probability, 0.5);
    EXPECT_EQ(s.delta_mean, 0.0);
    EXPECT_EQ(s.signed_log_mean, 0.0);
}

TEST(Bootstrap, DominantModelAlwaysWins) {
    const std::vector<double> a{0.1, 0.2, 0.3}, b{0.2, 0.3, 0.4};
    EXPECT_EQ(bootstrap_compare(a, b, 500, 1).win_probability, 1.0);
    EXPECT_EQ(bootstrap_compare(a, b, 500, 1, Better::Higher).win_probability, 0.0);
    // Swapping arguments flips the sign of every draw.
    const auto ab = bootstrap_compare(a, b, 300, 4), ba = bootstrap_compare(b, a, 300, 4);
    for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(ab.deltas[i], -ba.deltas[i]);
}

TEST(Bootstrap, InputErrors) {
    const std::vector<double> a{0.1, 0.2}, b{0.1};
    EXPECT_THROW(bootstrap_compare(a, b, 10, 1), InvalidArgument);
    EXPECT_THROW(bootstrap_compare(b, b, 10, 1), InvalidArgument);
    EXPECT_THROW(bootstrap_compare(a, a, 0, 1), InvalidArgument);
    EXPECT_EQ(signed_log(0.0), 0.0);
    EXPECT_DOUBLE_EQ(signed_log(-std::exp(2.0)), -2.0);
}
