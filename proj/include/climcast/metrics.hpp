// SPDX-License-Identifier: Apache-2.0
//
// Point-forecast metrics on the original count scale, seasonal centre-of-gravity
// timing, and paired bootstrap comparison of per-state metrics.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/data_model.hpp"
#include "climcast/errors.hpp"
#include "climcast/stats.hpp"

namespace climcast {

inline constexpr double kMareEpsilon = 1e-8;

namespace detail {
inline void require_pair(std::span<const double> y, std::span<const double> yhat, std::size_t min_len, const char* who) {
    if (y.size() != yhat.size()) throw InvalidArgument(std::string(who) + ": length mismatch");
    if (y.size() < min_len) throw InvalidArgument(std::string(who) + ": need at least " + std::to_string(min_len) + " points");
}
}  // namespace detail

inline double mse(std::span<const double> y, std::span<const double> yhat) {
    detail::require_pair(y, yhat, 2, "mse");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return s / static_cast<double>(y.size());
}

inline double r2(std::span<const double> y, std::span<const double> yhat) {
    detail::require_pair(y, yhat, 2, "r2");
    const double ybar = mean(y);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - ybar) * (y[i] - ybar);
    }
    if (ss_tot == 0.0) throw InvalidArgument("r2: observed series is constant");
    return 1.0 - ss_res / ss_tot;
}

/// Ratio-of-sums relative error: sum|y - yhat| / sum y, with eps as a floor on the denominator.
inline double mare(std::span<const double> y, std::span<const double> yhat) {
    detail::require_pair(y, yhat, 1, "mare");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0.0) throw InvalidArgument("mare: observed values must be non-negative");
        num += std::abs(y[i] - yhat[i]);
        den += y[i];
    }
    return num / std::max(den, kMareEpsilon);
}

// ---------------------------------------------------------------------------
// Seasonal timing

/// COG values are snapped to multiples of 2^-30 weeks so differences between
/// them are exact in double precision.
inline double snap_week(double w) {
    constexpr double grid = 1073741824.0;  // 2^30
    return std::round(w * grid) / grid;
}

/// Incidence-weighted circular mean week, in (0, 52].
inline double cog(std::span<const int> weeks, std::span<const double> values) {
    if (weeks.size() != values.size() || weeks.empty()) throw InvalidArgument("cog: weeks/values length mismatch");
    double c = 0.0, s = 0.0, total = 0.0;
    for (std::size_t i = 0; i < weeks.size(); ++i) {
        if (values[i] < 0.0) throw InvalidArgument("cog: negative incidence");
        const double a = 2.0 * std::numbers::pi * weeks[i] / kWeeksPerYear;
        c += values[i] * std::cos(a);
        s += values[i] * std::sin(a);
        total += values[i];
    }
    if (total <= 0.0) throw InvalidArgument("cog: season has zero total incidence");
    double w = snap_week(std::atan2(s, c) * kWeeksPerYear / (2.0 * std::numbers::pi));
    if (w <= 0.0) w += kWeeksPerYear;
    return w;
}

/// Circular distance in weeks, in [0, 26].
inline double cog_error(double a, double b) {
    double d = std::fmod(std::abs(a - b), static_cast<double>(kWeeksPerYear));
    return std::min(d, kWeeksPerYear - d);
}

/// Season label: the epidemiological year running from week 27 to week 26 of the next year.
inline int season_of(const EpiWeek& w) { return w.week >= 27 ? w.year : w.year - 1; }

struct SeasonTiming {
    int season = 0;
    double observed_cog = 0.0;
    double predicted_cog = 0.0;
    double error = 0.0;
    std::size_t weeks = 0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SeasonTiming, season, observed_cog, predicted_cog, error, weeks)

/// Per-season COG of observed vs predicted series; seasons with fewer than
/// `min_weeks` covered weeks or zero mass are skipped.
inline std::vector<SeasonTiming> seasonal_timing(std::span<const EpiWeek> when, std::span<const double> y,
                                                 std::span<const double> yhat, std::size_t min_weeks = 26) {
    detail::require_pair(y, yhat, 1, "seasonal_timing");
    if (when.size() != y.size()) throw InvalidArgument("seasonal_timing: week labels mismatch");
    std::map<int, std::vector<std::size_t>> by_season;
    for (std::size_t i = 0; i < when.size(); ++i) by_season[season_of(when[i])].push_back(i);
    std::vector<SeasonTiming> out;
    for (const auto& [season, idx] : by_season) {
        if (idx.size() < min_weeks) continue;
        std::vector<int> wk;
        std::vector<double> a, b;
        double ta = 0.0, tb = 0.0;
        for (auto i : idx) {
            wk.push_back(when[i].week);
            a.push_back(y[i]);
            b.push_back(std::max(0.0, yhat[i]));
            ta += y[i];
            tb += b.back();
        }
        if (ta <= 0.0 || tb <= 0.0) continue;
        SeasonTiming st;
        st.season = season;
        st.observed_cog = cog(wk, a);
        st.predicted_cog = cog(wk, b);
        st.error = cog_error(st.observed_cog, st.predicted_cog);
        st.weeks = idx.size();
        out.push_back(st);
    }
    return out;
}

struct MetricReport {
    std::string state_id;
    double mse = 0.0;
    double r2 = 0.0;
    double mare = 0.0;
    std::size_t n_points = 0;
    std::vector<SeasonTiming> cog;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MetricReport, state_id, mse, r2, mare, n_points, cog)

inline MetricReport metric_report(const std::string& state, std::span<const EpiWeek> when, std::span<const double> y,
                                  std::span<const double> yhat) {
    MetricReport m;
    m.state_id = state;
    m.mse = mse(y, yhat);
    m.r2 = r2(y, yhat);
    m.mare = mare(y, yhat);
    m.n_points = y.size();
    m.cog = seasonal_timing(when, y, yhat);
    return m;
}

// ---------------------------------------------------------------------------
// Bootstrap comparison

/// sgn(x) ln|x| with the removable singularity at 0 defined as 0.
inline double signed_log(double x) {
    if (x == 0.0) return 0.0;
    return (x > 0.0 ? 1.0 : -1.0) * std::log(std::abs(x));
}

/// Uniform index in [0, n) from one 64-bit draw (multiply-shift).
inline std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
}

enum class Better { Lower, Higher };

struct BootstrapSummary {
    std::string metric;
    std::size_t n_iterations = 0;
    std::size_t n_states = 0;
    std::vector<double> deltas;  // mean_A - mean_B per draw
    double delta_mean = 0.0;
    double delta_ci_lo = 0.0;
    double delta_ci_hi = 0.0;
    double signed_log_mean = 0.0;
    double signed_log_ci_lo = 0.0;
    double signed_log_ci_hi = 0.0;
    double win_probability = 0.0;  // P(A better)
};

inline void to_json(nlohmann::json& j, const BootstrapSummary& s) {
    j = {{"metric", s.metric},
         {"n_iterations", s.n_iterations},
         {"n_states", s.n_states},
         {"delta_mean", s.delta_mean},
         {"delta_ci", {s.delta_ci_lo, s.delta_ci_hi}},
         {"signed_log_mean", s.signed_log_mean},
         {"signed_log_ci", {s.signed_log_ci_lo, s.signed_log_ci_hi}},
         {"win_probability", s.win_probability}};
}

/// Paired bootstrap over states: each draw resamples state indices with replacement and
/// records delta = mean(A) - mean(B). Ties count half toward A's win probability.
inline BootstrapSummary bootstrap_compare(std::span<const double> a, std::span<const double> b, std::size_t iterations,
                                          std::uint64_t seed, Better better = Better::Lower, std::string metric = "mare") {
    if (a.size() != b.size()) throw InvalidArgument("bootstrap_compare: per-state vectors differ in length");
    if (a.size() < 2) throw InvalidArgument("bootstrap_compare: need at least 2 states");
    if (iterations == 0) throw InvalidArgument("bootstrap_compare: iterations must be positive");
    BootstrapSummary s;
    s.metric = std::move(metric);
    s.n_iterations = iterations;
    s.n_states = a.size();
    std::mt19937_64 rng(seed);
    const std::size_t n = a.size();
    std::vector<double> slog;
    s.deltas.reserve(iterations);
    slog.reserve(iterations);
    double wins = 0.0;
    for (std::size_t it = 0; it < iterations; ++it) {
        double sa = 0.0, sb = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = draw_index(rng, n);
            sa += a[i];
            sb += b[i];
        }
        const double delta = sa / static_cast<double>(n) - sb / static_cast<double>(n);
        s.deltas.push_back(delta);
        slog.push_back(signed_log(delta));
        if (delta == 0.0) wins += 0.5;
        else if ((better == Better::Lower) == (delta < 0.0)) wins += 1.0;
    }
    s.delta_mean = mean(s.deltas);
    s.delta_ci_lo = percentile(s.deltas, 0.025);
    s.delta_ci_hi = percentile(s.deltas, 0.975);
    s.signed_log_mean = mean(slog);
    s.signed_log_ci_lo = percentile(slog, 0.025);
    s.signed_log_ci_hi = percentile(slog, 0.975);
    s.win_probability = wins / static_cast<double>(iterations);
    return s;
}

}  // namespace climcast
