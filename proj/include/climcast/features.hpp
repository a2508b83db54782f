// SPDX-License-Identifier: Apache-2.0
//
// Per-week covariate vectors, MinMax scaling fitted on training rows, the
// Stage-1 look-back context and the Stage-2 16-week input window.
#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "climcast/data_model.hpp"
#include "climcast/errors.hpp"
#include "climcast/stats.hpp"

namespace climcast {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class FeatureRole { BaseMeteorology, Calendar, Epidemiological, WeatherLag, SyntheticLag, StateEmbedding };

NLOHMANN_JSON_SERIALIZE_ENUM(FeatureRole, {{FeatureRole::BaseMeteorology, "base_meteorology"},
                                           {FeatureRole::Calendar, "calendar"},
                                           {FeatureRole::Epidemiological, "epidemiological"},
                                           {FeatureRole::WeatherLag, "weather_lag"},
                                           {FeatureRole::SyntheticLag, "synthetic_lag"},
                                           {FeatureRole::StateEmbedding, "state_embedding"}})

struct CalendarFeatures {
    double sin = 0.0;
    double cos = 0.0;
    double holiday = 0.0;
};

inline CalendarFeatures calendar_features(int week, double holiday) {
    if (week < 1 || week > kWeeksPerYear) throw InvalidArgument("week must lie in 1..52, got " + std::to_string(week));
    const double angle = 2.0 * std::numbers::pi * week / kWeeksPerYear;
    return {std::sin(angle), std::cos(angle), holiday};
}

struct EpiFeatures {
    double extreme_cold = 0.0;
    double temp_range = 0.0;
    double precip_intensity = 0.0;
};

inline EpiFeatures epi_features(double tmin, double tmax, double prcp, double awnd, double q10) {
    return {tmin < q10 ? 1.0 : 0.0, tmax - tmin, prcp * awnd};
}

/// Ordered feature layout of a window row. Serialized with every trained model.
struct FeatureSchema {
    std::vector<std::string> names;
    std::vector<FeatureRole> roles;
    std::vector<int> weather_lag_offsets{7, 14};
    std::vector<int> incidence_lags{1, 2, 3, 4};
    int lookback = 16;
    int stage1_lookback = 4;
    int embedding_dim = 0;

    static FeatureSchema make(std::vector<int> weather_lags = {7, 14}, std::vector<int> incidence_lags = {1, 2, 3, 4},
                              int lookback = 16, int stage1_lookback = 4, int embedding_dim = 0) {
        FeatureSchema s;
        s.weather_lag_offsets = std::move(weather_lags);
        s.incidence_lags = std::move(incidence_lags);
        s.lookback = lookback;
        s.stage1_lookback = stage1_lookback;
        s.embedding_dim = embedding_dim;
        if (s.lookback < 1 || s.stage1_lookback < 1 || s.incidence_lags.empty() || s.embedding_dim < 0)
            throw InvalidArgument("invalid feature schema parameters");
        for (int l : s.incidence_lags)
            if (l < 1) throw InvalidArgument("incidence lags must be >= 1");
        for (int l : s.weather_lag_offsets)
            if (l < 1) throw InvalidArgument("weather lag offsets must be >= 1");
        auto add = [&](std::string n, FeatureRole r) {
            s.names.push_back(std::move(n));
            s.roles.push_back(r);
        };
        for (const char* n : {"tmin", "tmax", "tobs", "prcp", "snow", "snwd", "awnd", "population"})
            add(n, FeatureRole::BaseMeteorology);
        add("week_sin", FeatureRole::Calendar);
        add("week_cos", FeatureRole::Calendar);
        add("holiday", FeatureRole::Calendar);
        add("extreme_cold", FeatureRole::Epidemiological);
        add("temp_range", FeatureRole::Epidemiological);
        add("precip_intensity", FeatureRole::Epidemiological);
        for (int off : s.weather_lag_offsets)
            for (const char* n : {"tmin", "tmax", "prcp"}) add(std::string(n) + "_lag" + std::to_string(off), FeatureRole::WeatherLag);
        for (int l : s.incidence_lags) add("incidence_lag" + std::to_string(l), FeatureRole::SyntheticLag);
        for (int e = 0; e < s.embedding_dim; ++e) add("state_emb" + std::to_string(e), FeatureRole::StateEmbedding);
        return s;
    }

    /// Exogenous per-week dimension p (everything except lag channels and embeddings).
    std::size_t covariate_dim() const { return names.size() - incidence_lags.size() - static_cast<std::size_t>(embedding_dim); }
    /// Per-row width d of a Stage-2 window.
    std::size_t window_dim() const { return names.size(); }
    std::size_t stage1_dim() const { return covariate_dim() * static_cast<std::size_t>(stage1_lookback); }
    int max_weather_lag() const {
        int m = 0;
        for (int l : weather_lag_offsets) m = std::max(m, l);
        return m;
    }
    int max_incidence_lag() const {
        int m = 0;
        for (int l : incidence_lags) m = std::max(m, l);
        return m;
    }
    /// First panel index whose covariate row is fully defined.
    std::size_t first_usable() const { return static_cast<std::size_t>(max_weather_lag()); }

    std::string hash() const;
};

inline void to_json(nlohmann::json& j, const FeatureSchema& s) {
    j = {{"names", s.names},
         {"roles", s.roles},
         {"weather_lag_offsets", s.weather_lag_offsets},
         {"incidence_lags", s.incidence_lags},
         {"lookback", s.lookback},
         {"stage1_lookback", s.stage1_lookback},
         {"embedding_dim", s.embedding_dim}};
}

inline void from_json(const nlohmann::json& j, FeatureSchema& s) {
    s = FeatureSchema::make(j.at("weather_lag_offsets").get<std::vector<int>>(), j.at("incidence_lags").get<std::vector<int>>(),
                            j.at("lookback").get<int>(), j.at("stage1_lookback").get<int>(), j.at("embedding_dim").get<int>());
    if (s.names != j.at("names").get<std::vector<std::string>>()) throw ParseError("feature schema names do not match layout");
}

inline std::string FeatureSchema::hash() const { return hex64(fnv1a(nlohmann::json(*this).dump())); }

/// Per-column MinMax scaler. A constant column maps to 0; values outside the
/// training range are not clipped.
class Scaler {
public:
    Scaler() = default;
    Scaler(std::vector<double> min, std::vector<double> max) : min_(std::move(min)), max_(std::move(max)) {
        if (min_.size() != max_.size()) throw InvalidArgument("scaler min/max length mismatch");
        for (std::size_t c = 0; c < min_.size(); ++c)
            if (max_[c] < min_[c]) throw InvalidArgument("scaler max < min");
    }

    /// Fits on the given rows (each row a feature vector). Rows must be training rows only.
    static Scaler fit(const RowMatrix& rows) {
        if (rows.rows() == 0) throw InvalidArgument("cannot fit scaler on zero rows");
        std::vector<double> lo(static_cast<std::size_t>(rows.cols())), hi(lo.size());
        for (Eigen::Index c = 0; c < rows.cols(); ++c) {
            lo[static_cast<std::size_t>(c)] = rows.col(c).minCoeff();
            hi[static_cast<std::size_t>(c)] = rows.col(c).maxCoeff();
        }
        return Scaler(std::move(lo), std::move(hi));
    }

    static Scaler fit(std::span<const double> column) {
        if (column.empty()) throw InvalidArgument("cannot fit scaler on zero rows");
        const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
        return Scaler({*lo}, {*hi});
    }

    bool fitted() const { return !min_.empty(); }
    std::size_t dim() const { return min_.size(); }
    const std::vector<double>& min() const { return min_; }
    const std::vector<double>& max() const { return max_; }
    double range(std::size_t c) const { return max_.at(c) - min_.at(c); }

    double apply(double v, std::size_t c = 0) const {
        require(c);
        const double r = max_[c] - min_[c];
        return r > 0.0 ? (v - min_[c]) / r : 0.0;
    }

    double invert(double v, std::size_t c = 0) const {
        require(c);
        return min_[c] + v * (max_[c] - min_[c]);
    }

    RowMatrix apply(const RowMatrix& rows) const {
        if (!fitted()) throw InvalidArgument("scaler applied before fit");
        if (static_cast<std::size_t>(rows.cols()) != dim()) throw ShapeError("scaler dimension mismatch");
        RowMatrix out(rows.rows(), rows.cols());
        for (Eigen::Index i = 0; i < rows.rows(); ++i)
            for (Eigen::Index c = 0; c < rows.cols(); ++c)
                out(i, c) = apply(rows(i, c), static_cast<std::size_t>(c));
        return out;
    }

private:
    void require(std::size_t c) const {
        if (!fitted()) throw InvalidArgument("scaler applied before fit");
        if (c >= min_.size()) throw ShapeError("scaler column out of range");
    }

    std::vector<double> min_;
    std::vector<double> max_;
};

inline void to_json(nlohmann::json& j, const Scaler& s) { j = {{"min", s.min()}, {"max", s.max()}}; }
inline void from_json(const nlohmann::json& j, Scaler& s) {
    s = Scaler(j.at("min").get<std::vector<double>>(), j.at("max").get<std::vector<double>>());
}

/// Raw (unscaled) exogenous covariates for every panel row; rows before
/// `schema.first_usable()` lack weather-lag history and hold NaN.
inline RowMatrix raw_covariates(const WeeklyPanel& panel, const FeatureSchema& schema, double q10) {
    const std::size_t n = panel.size();
    const std::size_t p = schema.covariate_dim();
    RowMatrix x = RowMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p),
                                      std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = 0; t < n; ++t) {
        const auto& r = panel[t];
        auto row = x.row(static_cast<Eigen::Index>(t));
        Eigen::Index c = 0;
        for (double v : {r.tmin, r.tmax, r.tobs, r.prcp, r.snow, r.snwd, r.awnd, r.population}) row(c++) = v;
        const auto cal = calendar_features(r.when.week, r.holiday);
        row(c++) = cal.sin;
        row(c++) = cal.cos;
        row(c++) = cal.holiday;
        const auto epi = epi_features(r.tmin, r.tmax, r.prcp, r.awnd, q10);
        row(c++) = epi.extreme_cold;
        row(c++) = epi.temp_range;
        row(c++) = epi.precip_intensity;
        for (int off : schema.weather_lag_offsets) {
            const bool have = t >= static_cast<std::size_t>(off);
            for (auto field : {&WeeklyRecord::tmin, &WeeklyRecord::tmax, &WeeklyRecord::prcp})
                row(c++) = have ? panel[t - static_cast<std::size_t>(off)].*field : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return x;
}

/// Lagged copies of a series: out[t] = series[t - offset], NaN where undefined.
inline std::vector<double> lag_series(std::span<const double> series, int offset) {
    std::vector<double> out(series.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t t = static_cast<std::size_t>(offset); t < series.size(); ++t) out[t] = series[t - static_cast<std::size_t>(offset)];
    return out;
}

/// Fitted feature transform for one state: q10 threshold, covariate scaler, target scaler.
struct FeaturePipeline {
    FeatureSchema schema;
    double q10 = 0.0;
    Scaler covariates;
    Scaler target;

    /// Fits on rows [0, train_end). Nothing at or after train_end is read.
    static FeaturePipeline fit(const FeatureSchema& schema, const WeeklyPanel& panel, std::size_t train_end) {
        if (train_end > panel.size() || train_end <= schema.first_usable())
            throw InvalidArgument("training range too short to fit features");
        FeaturePipeline fp;
        fp.schema = schema;
        std::vector<double> tmin;
        std::vector<double> y;
        for (std::size_t t = 0; t < train_end; ++t) {
            tmin.push_back(panel[t].tmin);
            y.push_back(panel[t].incidence);
        }
        fp.q10 = percentile(tmin, 0.10);
        const RowMatrix raw = raw_covariates(panel.slice(0, train_end), schema, fp.q10);
        const auto first = static_cast<Eigen::Index>(schema.first_usable());
        fp.covariates = Scaler::fit(RowMatrix(raw.bottomRows(raw.rows() - first)));
        fp.target = Scaler::fit(y);
        return fp;
    }

    /// Scaled covariates for every row of `panel` (NaN rows before first_usable).
    RowMatrix covariates_scaled(const WeeklyPanel& panel) const {
        const RowMatrix raw = raw_covariates(panel, schema, q10);
        RowMatrix out = raw;
        for (Eigen::Index i = static_cast<Eigen::Index>(schema.first_usable()); i < raw.rows(); ++i)
            for (Eigen::Index c = 0; c < raw.cols(); ++c) out(i, c) = covariates.apply(raw(i, c), static_cast<std::size_t>(c));
        return out;
    }

    std::vector<double> incidence_scaled(const WeeklyPanel& panel) const {
        std::vector<double> out;
        out.reserve(panel.size());
        for (const auto& r : panel.records) out.push_back(target.apply(r.incidence));
        return out;
    }
};

inline void to_json(nlohmann::json& j, const FeaturePipeline& f) {
    j = {{"schema", f.schema}, {"q10", f.q10}, {"covariates", f.covariates}, {"target", f.target}};
}
inline void from_json(const nlohmann::json& j, FeaturePipeline& f) {
    f.schema = j.at("schema").get<FeatureSchema>();
    f.q10 = j.at("q10").get<double>();
    f.covariates = j.at("covariates").get<Scaler>();
    f.target = j.at("target").get<Scaler>();
}

/// Stage-1 context Z_t = [x_{t-L+1}, ..., x_t] for look-back L.
inline std::vector<double> build_stage1_context(const RowMatrix& covariates, std::size_t t, const FeatureSchema& schema) {
    const auto look = static_cast<std::size_t>(schema.stage1_lookback);
    if (t >= static_cast<std::size_t>(covariates.rows())) throw InvalidArgument("context index beyond panel");
    if (t + 1 < look || t + 1 - look < schema.first_usable())
        throw InvalidArgument("insufficient history for Stage-1 context at index " + std::to_string(t));
    std::vector<double> z;
    z.reserve(look * static_cast<std::size_t>(covariates.cols()));
    for (std::size_t s = t + 1 - look; s <= t; ++s)
        for (Eigen::Index c = 0; c < covariates.cols(); ++c) z.push_back(covariates(static_cast<Eigen::Index>(s), c));
    return z;
}

/// First index t at which build_stage1_context succeeds.
inline std::size_t first_context_index(const FeatureSchema& schema) {
    return schema.first_usable() + static_cast<std::size_t>(schema.stage1_lookback) - 1;
}

/// A 16 x d model input ending at `end_index` (inclusive); predicts incidence at end_index + 1.
struct FeatureWindow {
    RowMatrix values;
    std::size_t end_index = 0;
    std::string state_id;

    std::size_t target_index() const { return end_index + 1; }
};

/// Builds H_t. `lag_source[s]` is the (scaled) incidence signal for week s: observed
/// incidence in actual-lag mode, the Stage-1 prediction in synthetic mode; NaN marks
/// an unavailable value. Each row tau gets lag_source[tau - l] for every configured lag l.
inline FeatureWindow build_window(const RowMatrix& covariates, std::span<const double> lag_source, std::size_t t,
                                  const FeatureSchema& schema, std::span<const double> embedding = {},
                                  const std::string& state_id = {}) {
    const auto look = static_cast<std::size_t>(schema.lookback);
    if (t >= static_cast<std::size_t>(covariates.rows())) throw InvalidArgument("window end beyond panel");
    if (t + 1 < look || t + 1 - look < schema.first_usable())
        throw InvalidArgument("insufficient covariate history for window ending at " + std::to_string(t));
    if (embedding.size() != static_cast<std::size_t>(schema.embedding_dim))
        throw ShapeError("embedding length " + std::to_string(embedding.size()) + " does not match schema dim " +
                         std::to_string(schema.embedding_dim));
    const std::size_t p = schema.covariate_dim();
    if (static_cast<std::size_t>(covariates.cols()) != p) throw ShapeError("covariate width does not match schema");

    FeatureWindow w;
    w.end_index = t;
    w.state_id = state_id;
    w.values.resize(static_cast<Eigen::Index>(look), static_cast<Eigen::Index>(schema.window_dim()));
    for (std::size_t r = 0; r < look; ++r) {
        const std::size_t tau = t + 1 - look + r;
        auto row = w.values.row(static_cast<Eigen::Index>(r));
        row.head(static_cast<Eigen::Index>(p)) = covariates.row(static_cast<Eigen::Index>(tau));
        Eigen::Index c = static_cast<Eigen::Index>(p);
        for (int l : schema.incidence_lags) {
            const auto ul = static_cast<std::size_t>(l);
            if (tau < ul || tau - ul >= lag_source.size() || std::isnan(lag_source[tau - ul]))
                throw InvalidArgument("missing lag value for index " +
                                      (tau < ul ? std::string("<0") : std::to_string(tau - ul)));
            row(c++) = lag_source[tau - ul];
        }
        for (double e : embedding) row(c++) = e;
    }
    return w;
}

/// Earliest window end index given the earliest valid lag-source index.
inline std::size_t first_window_end(const FeatureSchema& schema, std::size_t first_lag_source_index) {
    const auto look = static_cast<std::size_t>(schema.lookback);
    const std::size_t by_covariates = schema.first_usable() + look - 1;
    const std::size_t by_lags = first_lag_source_index + static_cast<std::size_t>(schema.max_incidence_lag()) + look - 1;
    return std::max(by_covariates, by_lags);
}

}  // namespace climcast
