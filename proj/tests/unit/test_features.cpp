#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "climcast/data_model.hpp"
#include "climcast/features.hpp"

using namespace climcast;

TEST(Calendar, QuarterAndFullTurn) {
    const auto q = calendar_features(13, 0.0);
    EXPECT_NEAR(q.sin, 1.0, 1e-15);
    EXPECT_NEAR(q.cos, 0.0, 1e-15);
    const auto f = calendar_features(52, 1.0);
    EXPECT_NEAR(f.sin, 0.0, 1e-15);
    EXPECT_NEAR(f.cos, 1.0, 1e-15);
    EXPECT_EQ(f.holiday, 1.0);
}

TEST(Calendar, WeekSevenMatchesLongDoubleEvaluation) {
    const auto c = calendar_features(7, 0.0);
    const long double a = 2.0L * 3.14159265358979323846264338327950288L * 7.0L / 52.0L;
    EXPECT_NEAR(c.sin, static_cast<double>(std::sin(a)), 1e-12);
    EXPECT_NEAR(c.cos, static_cast<double>(std::cos(a)), 1e-12);
}

TEST(Calendar, RejectsOutOfRangeWeeks) {
    EXPECT_THROW(calendar_features(0, 0.0), InvalidArgument);
    EXPECT_THROW(calendar_features(53, 0.0), InvalidArgument);
}

TEST(EpiFeatures, HandCases) {
    EXPECT_EQ(epi_features(-10, 0, 0, 0, -5).extreme_cold, 1.0);
    EXPECT_EQ(epi_features(-5, 0, 0, 0, -5).extreme_cold, 0.0);
    EXPECT_EQ(epi_features(3, 10, 0, 0, 0).temp_range, 7.0);
    EXPECT_EQ(epi_features(0, 1, 2, 3, 0).precip_intensity, 6.0);
}

TEST(LagSeries, ShiftsAndLeavesHeadUndefined) {
    std::vector<double> s;
    for (int i = 1; i <= 20; ++i) s.push_back(i);
    const auto l7 = lag_series(s, 7);
    EXPECT_EQ(l7[7], 1.0);  // t = 8 in 1-based terms
    EXPECT_TRUE(std::isnan(l7[6]));
    const auto l14 = lag_series(s, 14);
    EXPECT_TRUE(std::isnan(l14[13]));
    EXPECT_EQ(l14[14], 1.0);
}

TEST(LagSeries, MatchesShiftOracle) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    std::vector<double> s(60);
    for (auto& v : s) v = n(rng);
    for (int off : {1, 4, 7, 14}) {
        const auto l = lag_series(s, off);
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (t < static_cast<std::size_t>(off)) EXPECT_TRUE(std::isnan(l[t]));
            else EXPECT_EQ(l[t], s[t - static_cast<std::size_t>(off)]);
        }
    }
}

TEST(Scaler, MinMaxWithoutClipping) {
    const std::vector<double> train{0.0, 10.0, 4.0};
    const auto s = Scaler::fit(train);
    EXPECT_EQ(s.apply(5.0), 0.5);
    EXPECT_NEAR(s.apply(12.0), 1.2, 1e-15);
    EXPECT_EQ(s.invert(0.5), 5.0);
}

TEST(Scaler, ConstantColumnMapsToZero) {
    const std::vector<double> train{3.0, 3.0, 3.0};
    const auto s = Scaler::fit(train);
    EXPECT_EQ(s.apply(3.0), 0.0);
    EXPECT_EQ(s.apply(100.0), 0.0);
}

TEST(Scaler, ApplyBeforeFitIsAnError) {
    Scaler s;
    EXPECT_THROW(s.apply(1.0), InvalidArgument);
}

TEST(Schema, DefaultLayout) {
    const auto s = FeatureSchema::make();
    EXPECT_EQ(s.covariate_dim(), 20u);
    EXPECT_EQ(s.window_dim(), 24u);
    EXPECT_EQ(s.stage1_dim(), 80u);
    EXPECT_EQ(s.first_usable(), 14u);
    EXPECT_EQ(s.names[14], "tmin_lag7");
    EXPECT_EQ(s.names[20], "incidence_lag1");
    const auto e = FeatureSchema::make({7, 14}, {1, 2, 3, 4}, 16, 4, 16);
    EXPECT_EQ(e.window_dim(), 40u);
    EXPECT_EQ(e.covariate_dim(), 20u);
}

TEST(Schema, JsonRoundTripKeepsHash) {
    const auto s = FeatureSchema::make({7, 14}, {1, 2, 3}, 12, 3, 0);
    const nlohmann::json j = s;
    const auto back = j.get<FeatureSchema>();
    EXPECT_EQ(back.names, s.names);
    EXPECT_EQ(back.hash(), s.hash());
    EXPECT_NE(FeatureSchema::make().hash(), s.hash());
}

TEST(FeaturePipeline, FitReadsTrainingRowsOnly) {
    auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto schema = FeatureSchema::make();
    const auto a = FeaturePipeline::fit(schema, panel, 200);
    for (std::size_t t = 200; t < panel.size(); ++t) {
        panel.records[t].incidence = 1e9;
        panel.records[t].tmin = -1e6;
        panel.records[t].tmax = 1e6;
    }
    const auto b = FeaturePipeline::fit(schema, panel, 200);
    EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}

TEST(FeaturePipeline, CovariatesMatchHandComputation) {
    const auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto schema = FeatureSchema::make();
    const auto fp = FeaturePipeline::fit(schema, panel, 200);
    const RowMatrix raw = raw_covariates(panel, schema, fp.q10);
    const std::size_t t = 40;
    const auto& r = panel[t];
    EXPECT_EQ(raw(40, 0), r.tmin);
    EXPECT_EQ(raw(40, 7), r.population);
    EXPECT_EQ(raw(40, 12), r.tmax - r.tmin);
    EXPECT_EQ(raw(40, 13), r.prcp * r.awnd);
    EXPECT_EQ(raw(40, 14), panel[t - 7].tmin);
    EXPECT_EQ(raw(40, 16), panel[t - 7].prcp);
    EXPECT_EQ(raw(40, 19), panel[t - 14].prcp);
    EXPECT_TRUE(std::isnan(raw(13, 17)));
    const RowMatrix scaled = fp.covariates_scaled(panel);
    for (Eigen::Index c = 0; c < scaled.cols(); ++c)
        EXPECT_DOUBLE_EQ(scaled(40, c), fp.covariates.apply(raw(40, c), static_cast<std::size_t>(c)));
}

TEST(Stage1Context, ToyTwoColumnOrder) {
    auto schema = FeatureSchema::make({1}, {1}, 2, 4, 0);
    RowMatrix cov(8, 2);
    for (int i = 0; i < 8; ++i) {
        cov(i, 0) = 10 * i;
        cov(i, 1) = 10 * i + 1;
    }
    const auto z = build_stage1_context(cov, 5, schema);
    EXPECT_EQ(z, (std::vector<double>{20, 21, 30, 31, 40, 41, 50, 51}));
    // First usable covariate row is 1, so the earliest context ends at 4.
    EXPECT_THROW(build_stage1_context(cov, 3, schema), InvalidArgument);
    EXPECT_NO_THROW(build_stage1_context(cov, 4, schema));
}

TEST(Stage1Context, MatchesConcatenationOracle) {
    const auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto schema = FeatureSchema::make();
    const auto fp = FeaturePipeline::fit(schema, panel, 200);
    const RowMatrix cov = fp.covariates_scaled(panel);
    EXPECT_THROW(build_stage1_context(cov, schema.first_usable(), schema), InvalidArgument);
    for (std::size_t t : {17u, 50u, 311u}) {
        const auto z = build_stage1_context(cov, t, schema);
        ASSERT_EQ(z.size(), 80u);
        std::size_t k = 0;
        for (std::size_t s = t - 3; s <= t; ++s)
            for (Eigen::Index c = 0; c < 20; ++c) EXPECT_EQ(z[k++], cov(static_cast<Eigen::Index>(s), c));
    }
}

TEST(Window, ActualLagChannelsAreShiftedIncidence) {
    const auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto schema = FeatureSchema::make();
    const auto fp = FeaturePipeline::fit(schema, panel, 200);
    const RowMatrix cov = fp.covariates_scaled(panel);
    const auto y = fp.incidence_scaled(panel);
    const std::size_t t = 60;
    const auto w = build_window(cov, y, t, schema);
    ASSERT_EQ(w.values.rows(), 16);
    ASSERT_EQ(w.values.cols(), 24);
    EXPECT_EQ(w.target_index(), 61u);
    for (int r = 0; r < 16; ++r) {
        const std::size_t tau = t - 15 + static_cast<std::size_t>(r);
        for (int l = 1; l <= 4; ++l) EXPECT_EQ(w.values(r, 19 + l), y[tau - static_cast<std::size_t>(l)]);
        EXPECT_EQ(w.values(r, 0), cov(static_cast<Eigen::Index>(tau), 0));
    }
}

TEST(Window, EmbeddingAppendsExactlyItsWidth) {
    const auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto base = FeatureSchema::make();
    const auto schema = FeatureSchema::make({7, 14}, {1, 2, 3, 4}, 16, 4, 16);
    const auto fp = FeaturePipeline::fit(base, panel, 200);
    const RowMatrix cov = fp.covariates_scaled(panel);
    const auto y = fp.incidence_scaled(panel);
    std::vector<double> e(16);
    for (int i = 0; i < 16; ++i) e[static_cast<std::size_t>(i)] = 0.1 * i;
    const auto w0 = build_window(cov, y, 60, base);
    const auto w1 = build_window(cov, y, 60, schema, e, "S1");
    EXPECT_EQ(w1.values.cols(), w0.values.cols() + 16);
    for (int r = 0; r < 16; ++r)
        for (int i = 0; i < 16; ++i) EXPECT_EQ(w1.values(r, 24 + i), 0.1 * i);
    EXPECT_THROW(build_window(cov, y, 60, schema, std::span<const double>(e.data(), 3)), ShapeError);
}

TEST(Window, MissingLagsAndHistoryAreErrors) {
    const auto panel = generate_synthetic(SyntheticScenario{})[0];
    const auto schema = FeatureSchema::make();
    const auto fp = FeaturePipeline::fit(schema, panel, 200);
    const RowMatrix cov = fp.covariates_scaled(panel);
    std::vector<double> lags(panel.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 40; i < lags.size(); ++i) lags[i] = 0.5;
    EXPECT_THROW(build_window(cov, lags, 50, schema), InvalidArgument);  // needs lags from 31
    EXPECT_NO_THROW(build_window(cov, lags, 59, schema));
    EXPECT_THROW(build_window(cov, lags, 28, schema), InvalidArgument);  // rows before first_usable
    EXPECT_EQ(first_window_end(schema, 0), 29u);
    EXPECT_EQ(first_window_end(schema, 40), 59u);
}
