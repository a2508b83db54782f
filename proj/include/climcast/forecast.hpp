// SPDX-License-Identifier: Apache-2.0
//
// Training orchestration and the three forecasting regimes: one-week-ahead,
// label-free recursive rollout, and MC-dropout intervals. Rollouts read
// climate covariates only; incidence never enters after training.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/data_model.hpp"
#include "climcast/errors.hpp"
#include "climcast/features.hpp"
#include "climcast/gbt.hpp"
#include "climcast/hybrid_net.hpp"
#include "climcast/metrics.hpp"
#include "climcast/stats.hpp"

namespace climcast {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TemporalSplit, n, train_end, early_stop_begin)

/// Split with an explicit training end; the last `holdout_frac` of [0, train_end) is the early-stop holdout.
inline TemporalSplit explicit_split(std::size_t n, std::size_t train_end, double holdout_frac = 0.2) {
    if (train_end > n || train_end < kMinSegmentWeeks) throw InvalidArgument("training range must hold >= 16 weeks inside the panel");
    if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw InvalidArgument("holdout_frac must lie in [0, 1)");
    TemporalSplit s;
    s.n = n;
    s.train_end = train_end;
    s.early_stop_begin = static_cast<std::size_t>(std::floor(static_cast<double>(train_end) * (1.0 - holdout_frac) + 1e-9));
    return s;
}

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
    std::vector<int> weather_lags{7, 14};
    std::vector<int> incidence_lags{1, 2, 3, 4};
    int lookback = 16;
    int stage1_lookback = 4;
    GbtParams gbt;
    NetConfig net;
    TrainConfig train;
    double train_frac = 0.7;
    double holdout_frac = 0.2;
    int cv_folds = 3;
    int cv_stage2_epochs = 0;  // 0 = cross-validate Stage-1 only

    FeatureSchema schema() const { return FeatureSchema::make(weather_lags, incidence_lags, lookback, stage1_lookback, 0); }

    /// Network config sized for this schema.
    NetConfig net_for(const FeatureSchema& s, std::size_t n_states) const {
        NetConfig c = net;
        c.input_dim = s.window_dim();
        c.seq_len = static_cast<std::size_t>(s.lookback);
        c.n_states = n_states;
        return c;
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PipelineConfig, weather_lags, incidence_lags, lookback, stage1_lookback, gbt, net, train,
                                   train_frac, holdout_frac, cv_folds, cv_stage2_epochs)

// ---------------------------------------------------------------------------
// Models

/// Per-state fitted transforms plus the state's embedding row (unused without embeddings).
struct StateEntry {
    FeaturePipeline features;
    std::size_t embedding_row = 0;
    std::size_t train_end = 0;
};

inline void to_json(nlohmann::json& j, const StateEntry& e) {
    j = {{"features", e.features}, {"embedding_row", e.embedding_row}, {"train_end", e.train_end}};
}
inline void from_json(const nlohmann::json& j, StateEntry& e) {
    e.features = j.at("features").get<FeaturePipeline>();
    e.embedding_row = j.at("embedding_row").get<std::size_t>();
    e.train_end = j.at("train_end").get<std::size_t>();
}

template <typename T>
struct ForecastModels {
    FeatureSchema schema;
    GbtModel stage1;
    HybridNet<T> net;
    std::map<std::string, StateEntry> states;
    FreezePlan freeze;

    const StateEntry& state(const std::string& id) const {
        auto it = states.find(id);
        if (it == states.end()) throw InvalidArgument("unknown state id '" + id + "'");
        return it->second;
    }
};

enum class LagMode { Actual, Synthetic };

inline LagMode parse_lag_mode(const std::string& s) {
    if (s == "actual") return LagMode::Actual;
    if (s == "synthetic") return LagMode::Synthetic;
    throw InvalidArgument("lag mode must be 'actual' or 'synthetic', got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Windows

/// Stacks windows ending at each index of `ends` into a B x L x d tensor.
template <typename T>
nn::Tensor<T> stack_windows(const RowMatrix& cov, std::span<const double> lag_source, const FeatureSchema& schema,
                            std::span<const std::size_t> ends) {
    const auto len = static_cast<std::size_t>(schema.lookback);
    const std::size_t d = schema.window_dim();
    nn::Tensor<T> x({ends.size(), len, d});
    for (std::size_t i = 0; i < ends.size(); ++i) {
        const auto w = build_window(cov, lag_source, ends[i], schema);
        for (std::size_t r = 0; r < len; ++r)
            for (std::size_t c = 0; c < d; ++c)
                x.at(i, r, c) = static_cast<T>(w.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
    }
    return x;
}

/// Training windows in actual-lag mode for targets [begin_target, end_target): window
/// ending at s-1 predicts scaled incidence at s. `y_scaled` must cover [0, end_target).
template <typename T>
WindowSet<T> training_windows(const RowMatrix& cov, std::span<const double> y_scaled, const FeatureSchema& schema,
                              std::size_t begin_target, std::size_t end_target, std::size_t state_row, const std::string& state_id) {
    WindowSet<T> set;
    const std::size_t first = std::max(begin_target, first_window_end(schema, 0) + 1);
    std::vector<std::size_t> ends;
    for (std::size_t s = first; s < end_target; ++s) ends.push_back(s - 1);
    if (ends.empty()) return set;
    set.x = stack_windows<T>(cov, y_scaled, schema, ends);
    for (auto e : ends) {
        set.y.push_back(y_scaled[e + 1]);
        set.state.push_back(state_row);
        set.target_index.push_back(e + 1);
        set.state_id.push_back(state_id);
    }
    return set;
}

/// Splits a window set by target index into (fit, early-stop holdout).
template <typename T>
std::pair<WindowSet<T>, WindowSet<T>> split_by_target(const WindowSet<T>& set, std::size_t holdout_begin) {
    std::vector<std::size_t> fit, val;
    for (std::size_t i = 0; i < set.size(); ++i) (set.target_index[i] < holdout_begin ? fit : val).push_back(i);
    return {set.subset(fit), set.subset(val)};
}

// ---------------------------------------------------------------------------
// Forward-chaining cross-validation

/// Positions into a chronologically ordered item list.
struct Fold {
    std::size_t train_begin = 0, train_end = 0;
    std::size_t val_begin = 0, val_end = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Fold, train_begin, train_end, val_begin, val_end)

/// k folds over n items cut into k + 1 contiguous blocks: fold i trains on blocks 0..i
/// and validates on block i + 1.
inline std::vector<Fold> forward_chaining_folds(std::size_t n, int k) {
    if (k < 1) throw InvalidArgument("need at least one CV fold");
    const auto blocks = static_cast<std::size_t>(k) + 1;
    if (n < blocks) throw InvalidArgument("too few items (" + std::to_string(n) + ") for " + std::to_string(k) + " CV folds");
    auto cut = [&](std::size_t j) { return j * n / blocks; };
    std::vector<Fold> folds;
    for (std::size_t i = 0; i < static_cast<std::size_t>(k); ++i) folds.push_back({0, cut(i + 1), cut(i + 1), cut(i + 2)});
    return folds;
}

struct CvFoldReport {
    Fold positions;
    std::vector<std::size_t> train_targets;
    std::vector<std::size_t> val_targets;
    double stage1_mse = 0.0;
    std::optional<double> stage2_mse;
};

inline void to_json(nlohmann::json& j, const CvFoldReport& f) {
    j = {{"positions", f.positions}, {"train_targets", f.train_targets}, {"val_targets", f.val_targets},
         {"stage1_mse", f.stage1_mse}};
    j["stage2_mse"] = f.stage2_mse ? nlohmann::json(*f.stage2_mse) : nlohmann::json(nullptr);
}

// ---------------------------------------------------------------------------
// Training

struct TrainReport {
    TemporalSplit split;
    double stage1_train_mse = 0.0;
    std::size_t stage1_pairs = 0;
    std::size_t fit_windows = 0;
    std::size_t holdout_windows = 0;
    std::size_t parameter_count = 0;
    TrainHistory history;
    std::vector<CvFoldReport> cv;
};

inline void to_json(nlohmann::json& j, const TrainReport& r) {
    j = {{"split", r.split},
         {"test_begin", r.split.test_begin()},
         {"stage1_train_mse", r.stage1_train_mse},
         {"stage1_pairs", r.stage1_pairs},
         {"fit_windows", r.fit_windows},
         {"holdout_windows", r.holdout_windows},
         {"parameter_count", r.parameter_count},
         {"history", r.history},
         {"cv", r.cv}};
}

template <typename T>
struct TrainedPipeline {
    ForecastModels<T> models;
    TrainReport report;
};

namespace detail {

inline std::vector<double> scaled_prefix(const FeaturePipeline& fp, const WeeklyPanel& panel, std::size_t end) {
    std::vector<double> y;
    y.reserve(end);
    for (std::size_t t = 0; t < end; ++t) y.push_back(fp.target.apply(panel[t].incidence));
    return y;
}

inline double gbt_mse(const GbtModel& m, const Stage1Pairs& p, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
        const auto row = p.contexts.row(static_cast<Eigen::Index>(i));
        const double e = m.predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))) - p.targets[i];
        s += e * e;
    }
    return s / static_cast<double>(end - begin);
}

inline Stage1Pairs pair_rows(const Stage1Pairs& p, std::size_t begin, std::size_t end) {
    Stage1Pairs out;
    out.contexts = p.contexts.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin));
    out.targets.assign(p.targets.begin() + static_cast<std::ptrdiff_t>(begin), p.targets.begin() + static_cast<std::ptrdiff_t>(end));
    out.target_index.assign(p.target_index.begin() + static_cast<std::ptrdiff_t>(begin),
                            p.target_index.begin() + static_cast<std::ptrdiff_t>(end));
    return out;
}

inline void append_pairs(Stage1Pairs& into, const Stage1Pairs& more) {
    if (more.targets.empty()) return;
    RowMatrix merged(into.contexts.rows() + more.contexts.rows(), more.contexts.cols());
    if (into.contexts.rows() > 0) merged.topRows(into.contexts.rows()) = into.contexts;
    merged.bottomRows(more.contexts.rows()) = more.contexts;
    into.contexts = std::move(merged);
    into.targets.insert(into.targets.end(), more.targets.begin(), more.targets.end());
    into.target_index.insert(into.target_index.end(), more.target_index.begin(), more.target_index.end());
}

inline GbtModel fit_stage1(const Stage1Pairs& pairs, const GbtParams& params, const FeatureSchema& schema) {
    auto m = fit_gbt(pairs.contexts, pairs.targets, params);
    m.schema_hash = schema.hash();
    return m;
}

}  // namespace detail

/// Fits Stage-1 and Stage-2 on [0, split.train_end) of one state's panel.
template <typename T = double>
TrainedPipeline<T> train_pipeline(const WeeklyPanel& panel, const PipelineConfig& cfg, const TemporalSplit& split) {
    if (split.n != panel.size()) throw InvalidArgument("split does not match panel length");
    const auto schema = cfg.schema();
    TrainedPipeline<T> out;
    auto& m = out.models;
    auto& rep = out.report;
    rep.split = split;
    m.schema = schema;

    const auto fp = FeaturePipeline::fit(schema, panel, split.train_end);
    m.states[panel.state_id] = {fp, 0, split.train_end};
    const RowMatrix cov = fp.covariates_scaled(panel);
    const auto y = detail::scaled_prefix(fp, panel, split.train_end);

    const auto pairs = stage1_pairs(cov, y, schema, 0, split.train_end);
    if (pairs.targets.size() < 2) throw InvalidArgument("training range yields fewer than 2 Stage-1 pairs");
    m.stage1 = detail::fit_stage1(pairs, cfg.gbt, schema);
    rep.stage1_pairs = pairs.targets.size();
    rep.stage1_train_mse = m.stage1.train_mse.back();

    const auto windows = training_windows<T>(cov, y, schema, 0, split.train_end, 0, panel.state_id);
    if (windows.size() == 0) throw InvalidArgument("training range yields no Stage-2 windows");
    auto [fit, val] = split_by_target(windows, split.early_stop_begin);
    if (fit.size() == 0) throw InvalidArgument("early-stop holdout leaves no fitting windows");
    rep.fit_windows = fit.size();
    rep.holdout_windows = val.size();

    // Forward-chaining CV over the training pairs/windows; the final fit below is unaffected.
    if (cfg.cv_folds > 0) {
        for (const auto& f : forward_chaining_folds(pairs.targets.size(), cfg.cv_folds)) {
            CvFoldReport r;
            r.positions = f;
            for (std::size_t i = f.train_begin; i < f.train_end; ++i) r.train_targets.push_back(pairs.target_index[i]);
            for (std::size_t i = f.val_begin; i < f.val_end; ++i) r.val_targets.push_back(pairs.target_index[i]);
            const auto sub = detail::pair_rows(pairs, f.train_begin, f.train_end);
            const auto gm = fit_gbt(sub.contexts, sub.targets, cfg.gbt);
            r.stage1_mse = detail::gbt_mse(gm, pairs, f.val_begin, f.val_end);
            if (cfg.cv_stage2_epochs > 0) {
                const std::size_t lo = r.val_targets.front(), hi = r.val_targets.back() + 1;
                std::vector<std::size_t> tr, va;
                for (std::size_t i = 0; i < windows.size(); ++i) {
                    if (windows.target_index[i] < lo) tr.push_back(i);
                    else if (windows.target_index[i] < hi) va.push_back(i);
                }
                if (!tr.empty() && !va.empty()) {
                    HybridNet<T> net(cfg.net_for(schema, 0));
                    TrainConfig tc = cfg.train;
                    tc.max_epochs = cfg.cv_stage2_epochs;
                    fit_network(net, windows.subset(tr), WindowSet<T>{}, tc);
                    r.stage2_mse = mse_on(net, windows.subset(va));
                }
            }
            rep.cv.push_back(std::move(r));
        }
    }

    m.net = HybridNet<T>(cfg.net_for(schema, 0));
    rep.parameter_count = m.net.parameter_count();
    rep.history = fit_network(m.net, fit, val, cfg.train);
    return out;
}

template <typename T = double>
TrainedPipeline<T> train_pipeline(const WeeklyPanel& panel, const PipelineConfig& cfg) {
    return train_pipeline<T>(panel, cfg, temporal_split(panel, cfg.train_frac, cfg.holdout_frac));
}

// ---------------------------------------------------------------------------
// Forecasting

struct ForecastPoint {
    std::size_t index = 0;  // panel index of the forecast week
    EpiWeek when;
    double mean = 0.0;
    double std = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::optional<double> observed;
};

struct ForecastResult {
    std::string state_id;
    std::size_t passes = 0;  // 0 = deterministic
    std::vector<ForecastPoint> points;

    std::vector<double> means() const {
        std::vector<double> v;
        for (const auto& p : points) v.push_back(p.mean);
        return v;
    }
};

struct RolloutPlan {
    std::size_t start = 0;  // panel index of the first forecast week
    std::size_t horizon = 52;
};

/// Inputs the forecaster may read for a state: scaled covariates and the Stage-1 series.
struct StateInputs {
    RowMatrix cov;
    std::vector<double> stage1;
};

template <typename T>
StateInputs state_inputs(const ForecastModels<T>& m, const WeeklyPanel& panel) {
    const auto& st = m.state(panel.state_id);
    StateInputs in;
    in.cov = st.features.covariates_scaled(panel);
    in.stage1 = stage1_prediction_series(m.stage1, in.cov, m.schema);
    return in;
}

/// First forecast index whose window can be built from Stage-1 lags alone.
inline std::size_t first_synthetic_target(const FeatureSchema& schema) {
    return first_window_end(schema, first_context_index(schema) + 1) + 1;
}

namespace detail {

template <typename T>
void check_plan(const ForecastModels<T>& m, const WeeklyPanel& panel, const RolloutPlan& plan) {
    if (plan.horizon == 0) throw InvalidArgument("horizon must be positive");
    const std::size_t first = first_synthetic_target(m.schema);
    if (plan.start < first)
        throw InvalidArgument("rollout start " + std::to_string(plan.start) + " precedes the first forecastable week " +
                              std::to_string(first));
    if (plan.start > panel.size() || plan.horizon > panel.size() - plan.start)
        throw InvalidArgument("horizon " + std::to_string(plan.horizon) + " exceeds available climate rows: only " +
                              std::to_string(panel.size() > plan.start ? panel.size() - plan.start : 0) +
                              " weeks from the start index");
}

inline double clip0(double v) { return v < 0.0 ? 0.0 : v; }

inline ForecastPoint point_at(const WeeklyPanel& panel, std::size_t idx, double mean_count) {
    ForecastPoint p;
    p.index = idx;
    p.when = panel[idx].when;
    p.mean = p.lo = p.hi = clip0(mean_count);
    return p;
}

}  // namespace detail

/// One-week-ahead forecast of incidence at t + 1 from the window ending at t. Actual mode
/// reads observed incidence at indices <= t - 1 as lags; synthetic mode reads none.
template <typename T>
double one_step_forecast(ForecastModels<T>& m, const WeeklyPanel& panel, std::size_t t, LagMode mode = LagMode::Actual) {
    const auto& st = m.state(panel.state_id);
    if (t >= panel.size()) throw InvalidArgument("window end beyond panel");
    const RowMatrix cov = st.features.covariates_scaled(panel);
    std::vector<double> lags;
    if (mode == LagMode::Actual) lags = detail::scaled_prefix(st.features, panel, t);
    else lags = stage1_prediction_series(m.stage1, cov, m.schema);
    const std::size_t ends[1] = {t};
    const auto x = stack_windows<T>(cov, lags, m.schema, ends);
    nn::Rng rng(0);
    const auto y = m.net.forward(x, {st.embedding_row}, false, rng);
    return detail::clip0(st.features.target.invert(static_cast<double>(y[0])));
}

/// Deterministic one-step forecasts for targets [begin, end).
template <typename T>
ForecastResult one_step_series(ForecastModels<T>& m, const WeeklyPanel& panel, std::size_t begin, std::size_t end,
                               LagMode mode) {
    const auto& st = m.state(panel.state_id);
    if (end > panel.size() || begin >= end) throw InvalidArgument("invalid one-step target range");
    const RowMatrix cov = st.features.covariates_scaled(panel);
    std::vector<double> lags = mode == LagMode::Actual ? detail::scaled_prefix(st.features, panel, end - 1)
                                                       : stage1_prediction_series(m.stage1, cov, m.schema);
    std::vector<std::size_t> ends;
    for (std::size_t s = begin; s < end; ++s) {
        if (s == 0) throw InvalidArgument("target index 0 has no history");
        ends.push_back(s - 1);
    }
    WindowSet<T> set;
    set.x = stack_windows<T>(cov, lags, m.schema, ends);
    set.state.assign(ends.size(), st.embedding_row);
    set.y.assign(ends.size(), 0.0);
    const auto pred = predict_windows(m.net, set);
    ForecastResult r;
    r.state_id = panel.state_id;
    for (std::size_t i = 0; i < ends.size(); ++i)
        r.points.push_back(detail::point_at(panel, ends[i] + 1, st.features.target.invert(pred[i])));
    return r;
}

/// Label-free multi-week forecast: every lag channel comes from the Stage-1 table built
/// from observed climate, and the network never sees its own outputs.
template <typename T>
ForecastResult recursive_rollout(ForecastModels<T>& m, const WeeklyPanel& panel, const RolloutPlan& plan) {
    detail::check_plan(m, panel, plan);
    return one_step_series(m, panel, plan.start, plan.start + plan.horizon, LagMode::Synthetic);
}

/// Rollout with T stochastic passes per week (dropout active). Mean, population std and
/// linearly interpolated 2.5/97.5 percentiles are taken in scaled space, then inverted.
template <typename T>
ForecastResult mc_dropout_forecast(ForecastModels<T>& m, const WeeklyPanel& panel, const RolloutPlan& plan, std::size_t passes = 50,
                                   std::uint64_t seed = 7) {
    if (passes < 2) throw InvalidArgument("MC dropout needs at least 2 passes (std undefined for " + std::to_string(passes) + ")");
    detail::check_plan(m, panel, plan);
    const auto& st = m.state(panel.state_id);
    const auto in = state_inputs(m, panel);
    ForecastResult r;
    r.state_id = panel.state_id;
    r.passes = passes;
    nn::Rng rng(seed);
    const std::vector<std::size_t> rows(passes, st.embedding_row);
    for (std::size_t s = plan.start; s < plan.start + plan.horizon; ++s) {
        const std::size_t ends[1] = {s - 1};
        const auto one = stack_windows<T>(in.cov, in.stage1, m.schema, ends);
        std::vector<double> v(passes);
        if (m.net.has_dropout()) {
            nn::Tensor<T> x({passes, one.dim(1), one.dim(2)});
            for (std::size_t k = 0; k < passes; ++k) std::copy(one.values().begin(), one.values().end(), x.data() + k * one.size());
            const auto y = m.net.forward(x, rows, true, rng);
            for (std::size_t k = 0; k < passes; ++k) v[k] = static_cast<double>(y[k]);
        } else {
            // Every pass would be identical; batching copies would only add GEMM rounding noise.
            v.assign(passes, static_cast<double>(m.net.forward(one, {st.embedding_row}, true, rng)[0]));
        }
        // Moments are taken around the first sample, so identical passes give exactly zero spread.
        double shift = 0.0, var = 0.0;
        for (double e : v) shift += e - v[0];
        shift /= static_cast<double>(passes);
        const double mu = v[0] + shift;
        for (double e : v) var += (e - v[0] - shift) * (e - v[0] - shift);
        var /= static_cast<double>(passes);
        const auto& sc = st.features.target;
        ForecastPoint p;
        p.index = s;
        p.when = panel[s].when;
        p.mean = detail::clip0(sc.invert(mu));
        p.std = std::sqrt(var) * sc.range(0);
        p.lo = detail::clip0(sc.invert(percentile(v, 0.025)));
        p.hi = detail::clip0(sc.invert(percentile(v, 0.975)));
        r.points.push_back(p);
    }
    return r;
}

/// Copies observed incidence into each point. Kept apart from forecasting so the
/// forecaster itself never touches test labels.
inline void attach_observed(ForecastResult& r, const WeeklyPanel& panel) {
    for (auto& p : r.points) {
        if (p.index >= panel.size()) throw InvalidArgument("forecast index beyond observed panel");
        p.observed = panel[p.index].incidence;
    }
}

inline MetricReport evaluate_forecast(const ForecastResult& r, const WeeklyPanel& observed) {
    std::vector<double> y, yhat;
    std::vector<EpiWeek> when;
    for (const auto& p : r.points) {
        if (p.index >= observed.size()) throw InvalidArgument("forecast index beyond observed panel");
        y.push_back(observed[p.index].incidence);
        yhat.push_back(p.mean);
        when.push_back(p.when);
    }
    return metric_report(r.state_id, when, y, yhat);
}

inline constexpr std::string_view kForecastHeader = "state,year,week,forecast_mean,forecast_std,ci_lo,ci_hi";

inline void write_forecast_csv(std::ostream& os, const std::vector<ForecastResult>& results, bool with_observed) {
    os << kForecastHeader << (with_observed ? ",observed" : "") << '\n';
    for (const auto& r : results)
        for (const auto& p : r.points) {
            os << r.state_id << ',' << p.when.year << ',' << p.when.week << ',' << detail::format_number(p.mean) << ','
               << detail::format_number(p.std) << ',' << detail::format_number(p.lo) << ',' << detail::format_number(p.hi);
            if (with_observed) {
                if (!p.observed) throw InvalidArgument("observed column requested but not attached");
                os << ',' << detail::format_number(*p.observed);
            }
            os << '\n';
        }
}

/// Reads a forecast CSV back, one result per state in order of first appearance.
/// Panel indices are not stored in the file and come back as row positions.
inline std::vector<ForecastResult> read_forecast_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("forecast CSV is empty");
    const auto header = std::string(detail::trim(line));
    const bool observed = header == std::string(kForecastHeader) + ",observed";
    if (!observed && header != kForecastHeader) throw ParseError("unexpected forecast CSV header: " + header);
    std::vector<ForecastResult> out;
    std::map<std::string, std::size_t> slot;
    for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != (observed ? 8u : 7u)) throw ParseError("row " + std::to_string(line_no) + ": wrong number of columns");
        const std::string id(detail::trim(cells[0]));
        auto [it, fresh] = slot.try_emplace(id, out.size());
        if (fresh) out.push_back({id, 0, {}});
        auto& r = out[it->second];
        ForecastPoint p;
        p.index = r.points.size();
        p.when = {detail::parse_int(cells[1], line_no, "year"), detail::parse_int(cells[2], line_no, "week")};
        p.mean = detail::parse_number(cells[3], line_no, "forecast_mean");
        p.std = detail::parse_number(cells[4], line_no, "forecast_std");
        p.lo = detail::parse_number(cells[5], line_no, "ci_lo");
        p.hi = detail::parse_number(cells[6], line_no, "ci_hi");
        if (observed) p.observed = detail::parse_number(cells[7], line_no, "observed");
        r.points.push_back(p);
    }
    return out;
}

inline std::vector<ForecastResult> read_forecast_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open " + path);
    return read_forecast_csv(in);
}

// ---------------------------------------------------------------------------
// Checkpoints:model.json (everything but weights) + weights.bin (float64, little-endian).

inline constexpr std::string_view kCheckpointFormat = "climcast-checkpoint/1";

template <typename T>
std::pair<nlohmann::json, std::string> serialize_models(ForecastModels<T>& m) {
    auto [tensors, blob] = nn::pack_params(m.net.params());
    nlohmann::json j = {{"format", kCheckpointFormat},
                        {"schema", m.schema},
                        {"schema_hash", m.schema.hash()},
                        {"net", m.net.config()},
                        {"stage1", m.stage1},
                        {"states", m.states},
                        {"freeze_plan", m.freeze},
                        {"weights", tensors}};
    return {j, blob};
}

template <typename T>
std::string checkpoint_hash(ForecastModels<T>& m) {
    auto [j, blob] = serialize_models(m);
    return hex64(fnv1a(blob, fnv1a(j.dump())));
}

template <typename T>
std::string save_models(ForecastModels<T>& m, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto [j, blob] = serialize_models(m);
    nn::write_file((dir / "model.json").string(), j.dump(1));
    nn::write_file((dir / "weights.bin").string(), blob);
    nn::write_file((dir / "schema.json").string(), nlohmann::json(m.schema).dump(1));
    return hex64(fnv1a(blob, fnv1a(j.dump())));
}

template <typename T = double>
ForecastModels<T> load_models(const std::filesystem::path& dir) {
    const auto path = dir / "model.json";
    if (!std::filesystem::exists(path)) throw InvalidArgument("no checkpoint at " + dir.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(nn::read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("corrupt checkpoint manifest: " + std::string(e.what()));
    }
    if (j.value("format", "") != kCheckpointFormat) throw ParseError("unrecognized checkpoint format");
    ForecastModels<T> m;
    try {
        m.schema = j.at("schema").get<FeatureSchema>();
        if (j.at("schema_hash").get<std::string>() != m.schema.hash()) throw ParseError("checkpoint schema hash mismatch");
        m.stage1 = j.at("stage1").get<GbtModel>();
        m.states = j.at("states").get<std::map<std::string, StateEntry>>();
        m.freeze = j.at("freeze_plan").get<FreezePlan>();
        m.net = HybridNet<T>(j.at("net").get<NetConfig>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("malformed checkpoint: " + std::string(e.what()));
    }
    if (m.stage1.n_features != m.schema.stage1_dim()) throw ParseError("Stage-1 model width does not match schema");
    nn::unpack_params(m.net.params(), j.at("weights"), nn::read_file((dir / "weights.bin").string()));
    return m;
}

}  // namespace climcast
