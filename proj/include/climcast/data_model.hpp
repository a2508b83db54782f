// SPDX-License-Identifier: Apache-2.0
//
// Weekly per-state panels: CSV ingestion, alignment, chronological splitting
// and a seeded synthetic generator with known climate-to-incidence structure.
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "climcast/errors.hpp"

namespace climcast {

inline constexpr int kWeeksPerYear = 52;

struct EpiWeek {
    int year = 0;
    int week = 1;  // 1..52

    friend auto operator<=>(const EpiWeek&, const EpiWeek&) = default;

    EpiWeek next() const { return week == kWeeksPerYear ? EpiWeek{year + 1, 1} : EpiWeek{year, week + 1}; }

    std::string str() const {
        std::ostringstream os;
        os << year << "-W" << (week < 10 ? "0" : "") << week;
        return os.str();
    }
};

struct WeeklyRecord {
    EpiWeek when;
    double incidence = 0.0;
    double tmin = 0.0;
    double tmax = 0.0;
    double tobs = 0.0;
    double prcp = 0.0;
    double snow = 0.0;
    double snwd = 0.0;
    double awnd = 0.0;
    double population = 0.0;
    double holiday = 0.0;
};

/// Climate columns in CSV order; also the order used for missing-value filling.
inline constexpr std::array<double WeeklyRecord::*, 9> kClimateFields = {
    &WeeklyRecord::tmin, &WeeklyRecord::tmax, &WeeklyRecord::tobs,       &WeeklyRecord::prcp,   &WeeklyRecord::snow,
    &WeeklyRecord::snwd, &WeeklyRecord::awnd, &WeeklyRecord::population, &WeeklyRecord::holiday};

inline constexpr std::string_view kCsvHeader =
    "state,year,week,incidence,tmin,tmax,tobs,prcp,snow,snwd,awnd,population,holiday";

/// Aligned, gap-free weekly series for a single state. Treated as an immutable value.
struct WeeklyPanel {
    std::string state_id;
    std::vector<WeeklyRecord> records;
    std::string source;

    std::size_t size() const { return records.size(); }
    const WeeklyRecord& operator[](std::size_t i) const { return records[i]; }

    std::vector<double> column(double WeeklyRecord::*field) const {
        std::vector<double> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(r.*field);
        return out;
    }
    std::vector<double> incidence() const { return column(&WeeklyRecord::incidence); }

    /// Copy of rows [begin, end).
    WeeklyPanel slice(std::size_t begin, std::size_t end) const {
        if (begin > end || end > records.size()) throw InvalidArgument("panel slice out of range");
        WeeklyPanel out{state_id, {records.begin() + static_cast<std::ptrdiff_t>(begin),
                                   records.begin() + static_cast<std::ptrdiff_t>(end)},
                        source};
        return out;
    }
};

/// Minimum number of weeks a panel must hold: one 16-week window plus a target.
inline constexpr std::size_t kMinPanelWeeks = 17;

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::string cell_error(std::size_t line_no, std::string_view column, std::string_view what) {
    std::ostringstream os;
    os << "row " << line_no << ", column '" << column << "': " << what;
    return os.str();
}

inline double parse_number(std::string_view cell, std::size_t line_no, std::string_view column) {
    cell = trim(cell);
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value))
        throw ParseError(cell_error(line_no, column, "not a number: '" + std::string(cell) + "'"));
    return value;
}

inline int parse_int(std::string_view cell, std::size_t line_no, std::string_view column) {
    cell = trim(cell);
    int value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size())
        throw ParseError(cell_error(line_no, column, "not an integer: '" + std::string(cell) + "'"));
    return value;
}

inline std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

struct RawRow {
    EpiWeek when;
    std::array<double, 10> values{};  // incidence then climate fields, NaN when missing
};

// Averages rows sharing a week (daily or per-station rows). Holiday is the max over rows.
inline std::vector<WeeklyRecord> aggregate_weeks(const std::vector<RawRow>& rows, const std::string& state) {
    std::map<EpiWeek, std::vector<const RawRow*>> by_week;
    for (const auto& r : rows) by_week[r.when].push_back(&r);

    std::vector<WeeklyRecord> out;
    out.reserve(by_week.size());
    for (const auto& [when, group] : by_week) {
        std::array<double, 10> agg{};
        for (std::size_t c = 0; c < agg.size(); ++c) {
            const bool is_holiday = (c == agg.size() - 1);
            double acc = is_holiday ? -std::numeric_limits<double>::infinity() : 0.0;
            std::size_t n = 0;
            for (const auto* r : group) {
                const double v = r->values[c];
                if (std::isnan(v)) continue;
                acc = is_holiday ? std::max(acc, v) : acc + v;
                ++n;
            }
            agg[c] = n == 0 ? std::numeric_limits<double>::quiet_NaN() : (is_holiday ? acc : acc / static_cast<double>(n));
        }
        if (std::isnan(agg[0]))
            throw ParseError("state " + state + ", week " + when.str() + ": incidence missing on every row");
        WeeklyRecord rec;
        rec.when = when;
        rec.incidence = agg[0];
        for (std::size_t f = 0; f < kClimateFields.size(); ++f) rec.*kClimateFields[f] = agg[f + 1];
        out.push_back(rec);
    }
    return out;
}

// Forward-fill within the series, then back-fill the leading gap.
inline void fill_missing(std::vector<WeeklyRecord>& recs, const std::string& state) {
    for (auto field : kClimateFields) {
        double last = std::numeric_limits<double>::quiet_NaN();
        for (auto& r : recs) {
            if (std::isnan(r.*field)) r.*field = last;
            else last = r.*field;
        }
        const auto first = std::find_if(recs.begin(), recs.end(), [&](const WeeklyRecord& r) { return !std::isnan(r.*field); });
        if (first == recs.end()) throw ParseError("state " + state + ": a climate column is empty for every week");
        const double fill = (*first).*field;
        for (auto it = recs.begin(); it != first; ++it) (*it).*field = fill;
    }
}

}  // namespace detail

/// Checks record-level invariants and weekly contiguity; throws on the first violation.
inline void validate_panel(const WeeklyPanel& panel) {
    if (panel.size() < kMinPanelWeeks)
        throw InvalidArgument("state " + panel.state_id + ": panel has " + std::to_string(panel.size()) +
                              " weeks, need at least " + std::to_string(kMinPanelWeeks));
    std::vector<std::string> missing;
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& r = panel[i];
        if (r.when.week < 1 || r.when.week > kWeeksPerYear)
            throw InvalidArgument("week out of range at " + r.when.str());
        if (!(r.incidence >= 0.0)) throw InvalidArgument("negative incidence at " + r.when.str());
        if (r.tmax < r.tmin) throw InvalidArgument("tmax < tmin at " + r.when.str());
        if (i > 0) {
            if (!(panel[i - 1].when < r.when)) throw AlignmentError("weeks not strictly increasing at " + r.when.str());
            for (EpiWeek w = panel[i - 1].when.next(); w < r.when; w = w.next()) missing.push_back(w.str());
        }
    }
    if (!missing.empty()) {
        std::string msg = "state " + panel.state_id + ": missing weeks";
        for (const auto& m : missing) msg += " " + m;
        throw AlignmentError(msg);
    }
}

/// Reads every state in a CSV file. Rows sharing (state, year, week) are averaged;
/// week 53 folds into week 52.
inline std::map<std::string, WeeklyPanel> load_panels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("row 1: empty file, header required");
    if (detail::trim(line) != kCsvHeader) throw ParseError("row 1: header must be '" + std::string(kCsvHeader) + "'");

    static const std::array<std::string_view, 13> names = {"state", "year", "week", "incidence", "tmin",
                                                           "tmax",  "tobs", "prcp", "snow",      "snwd",
                                                           "awnd",  "population", "holiday"};
    std::map<std::string, std::vector<detail::RawRow>> raw;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != names.size())
            throw ParseError(detail::cell_error(line_no, "*", "expected 13 columns, found " + std::to_string(cells.size())));
        const std::string state(detail::trim(cells[0]));
        if (state.empty()) throw ParseError(detail::cell_error(line_no, "state", "empty state id"));
        detail::RawRow row;
        row.when.year = detail::parse_int(cells[1], line_no, "year");
        row.when.week = detail::parse_int(cells[2], line_no, "week");
        if (row.when.week < 1 || row.when.week > 53)
            throw ParseError(detail::cell_error(line_no, "week", "must be in 1..53"));
        if (row.when.week == 53) row.when.week = kWeeksPerYear;
        for (std::size_t c = 3; c < names.size(); ++c) row.values[c - 3] = detail::parse_number(cells[c], line_no, names[c]);
        if (row.values[0] < 0.0) throw ParseError(detail::cell_error(line_no, "incidence", "negative count"));
        raw[state].push_back(row);
    }

    std::map<std::string, WeeklyPanel> panels;
    for (auto& [state, rows] : raw) {
        WeeklyPanel p{state, detail::aggregate_weeks(rows, state), path};
        detail::fill_missing(p.records, state);
        validate_panel(p);
        panels.emplace(state, std::move(p));
    }
    return panels;
}

inline WeeklyPanel load_panel(const std::string& path, const std::string& state_id) {
    auto all = load_panels(path);
    auto it = all.find(state_id);
    if (it == all.end()) throw InvalidArgument("state '" + state_id + "' not found in " + path);
    return std::move(it->second);
}

inline void write_panels(std::ostream& os, const std::vector<WeeklyPanel>& panels) {
    using detail::format_number;
    os << kCsvHeader << '\n';
    for (const auto& p : panels) {
        for (const auto& r : p.records) {
            os << p.state_id << ',' << r.when.year << ',' << r.when.week << ',' << format_number(r.incidence);
            for (auto field : kClimateFields) os << ',' << format_number(r.*field);
            os << '\n';
        }
    }
}

inline void write_panels(const std::string& path, const std::vector<WeeklyPanel>& panels) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path);
    write_panels(out, panels);
}

/// Chronological index ranges produced by temporal_split. All ranges are half-open.
struct TemporalSplit {
    std::size_t n = 0;
    std::size_t train_end = 0;        // train = [0, train_end)
    std::size_t early_stop_begin = 0;  // holdout = [early_stop_begin, train_end)
    std::size_t test_begin() const { return train_end; }
    std::size_t test_end() const { return n; }
    std::size_t test_size() const { return n - train_end; }
};

inline constexpr std::size_t kMinSegmentWeeks = 16;

/// Chronological train/test split; the trailing `holdout_frac` of train is reserved for early stopping.
inline TemporalSplit temporal_split(std::size_t n_weeks, double train_frac, double holdout_frac = 0.2) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw InvalidArgument("train_frac must lie in (0, 1)");
    if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) throw InvalidArgument("holdout_frac must lie in [0, 1)");
    TemporalSplit s;
    s.n = n_weeks;
    s.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n_weeks) * train_frac + 1e-9));
    if (s.train_end < kMinSegmentWeeks || n_weeks - s.train_end < kMinSegmentWeeks)
        throw InvalidArgument("panel of " + std::to_string(n_weeks) + " weeks too short: both segments need >= 16 weeks");
    s.early_stop_begin =
        static_cast<std::size_t>(std::floor(static_cast<double>(s.train_end) * (1.0 - holdout_frac) + 1e-9));
    return s;
}

inline TemporalSplit temporal_split(const WeeklyPanel& panel, double train_frac, double holdout_frac = 0.2) {
    return temporal_split(panel.size(), train_frac, holdout_frac);
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SyntheticScenario {
    int n_states = 1;
    int n_weeks = 312;
    std::vector<double> amplitude{200.0};  // per state, cycled when shorter than n_states
    std::vector<double> phase{0.0};        // weeks by which the cold season (and epidemic) is shifted
    int lag_weeks = 3;                     // climate-to-incidence lag
    double noise = 0.0;                    // incidence noise level (0 = deterministic given climate)
    double climate_noise = 1.0;            // scale of weather anomalies around climatology
    double baseline = 10.0;
    std::uint64_t seed = 42;
    int start_year = 2015;

    /// Family of `n` states with varied amplitude and phase.
    static SyntheticScenario family(int n, std::uint64_t seed, double noise = 0.0) {
        SyntheticScenario sc;
        sc.n_states = n;
        sc.seed = seed;
        sc.noise = noise;
        sc.amplitude.clear();
        sc.phase.clear();
        for (int s = 0; s < n; ++s) {
            sc.amplitude.push_back(120.0 + 60.0 * (s % 3));
            sc.phase.push_back(static_cast<double>((s * 5) % 13) - 4.0);
        }
        return sc;
    }
};

inline std::string synthetic_state_id(int s) { return "S" + std::to_string(s + 1); }

namespace detail {

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

inline bool is_holiday_week(int w) { return w == 1 || w == 22 || w == 27 || w == 36 || w == 47 || w == 52; }

}  // namespace detail

/// Generates one panel per state. Incidence is baseline + amplitude * (seasonal + cold-driven
/// response to TMIN `lag_weeks` earlier), modulated by a persistent latent factor and white
/// noise when `noise > 0`, clipped at zero.
inline std::vector<WeeklyPanel> generate_synthetic(const SyntheticScenario& sc) {
    if (sc.n_states < 1 || sc.n_weeks < static_cast<int>(kMinPanelWeeks) || sc.lag_weeks < 0 ||
        sc.amplitude.empty() || sc.phase.empty() || sc.noise < 0.0 || sc.climate_noise < 0.0)
        throw InvalidArgument("invalid synthetic scenario");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<WeeklyPanel> panels;
    for (int s = 0; s < sc.n_states; ++s) {
        std::seed_seq seq{static_cast<std::uint32_t>(sc.seed), static_cast<std::uint32_t>(sc.seed >> 32),
                          static_cast<std::uint32_t>(s), 0x5eedu};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);

        const double amp = sc.amplitude[static_cast<std::size_t>(s) % sc.amplitude.size()];
        const double phase = sc.phase[static_cast<std::size_t>(s) % sc.phase.size()];
        const double t_mean = 6.0 - 2.0 * (s % 4);
        const double t_amp = 10.0 + 1.5 * (s % 3);
        const double cold_week = 3.0 + phase;
        const double population = 1.0e6 * (1.0 + s);

        const int burn = sc.lag_weeks + 8;
        const int total = sc.n_weeks + burn;
        std::vector<WeeklyRecord> recs(static_cast<std::size_t>(total));
        double anomaly = 0.0;
        double snwd = 0.0;
        EpiWeek when{sc.start_year, 1};
        for (int i = 0; i < burn; ++i) {
            when = when.week == 1 ? EpiWeek{when.year - 1, kWeeksPerYear} : EpiWeek{when.year, when.week - 1};
        }
        for (int i = 0; i < total; ++i, when = when.next()) {
            auto& r = recs[static_cast<std::size_t>(i)];
            r.when = when;
            const double season = std::cos(two_pi * (when.week - cold_week) / kWeeksPerYear);  // +1 at coldest
            anomaly = 0.8 * anomaly + sc.climate_noise * 3.0 * 0.6 * normal(rng);
            r.tmin = t_mean - t_amp * season + anomaly;
            r.tmax = r.tmin + 8.0 - 2.0 * season + 0.5 * sc.climate_noise * std::abs(normal(rng));
            r.tobs = 0.5 * (r.tmin + r.tmax);
            r.prcp = std::max(0.0, 20.0 + 8.0 * season + 6.0 * sc.climate_noise * normal(rng));
            r.snow = r.tmin < 0.0 ? 0.05 * r.prcp * (-r.tmin) : 0.0;
            snwd = 0.7 * snwd + r.snow;
            r.snwd = snwd;
            r.awnd = std::max(0.0, 4.0 + 1.5 * season + 0.5 * sc.climate_noise * normal(rng));
            r.population = population;
            r.holiday = detail::is_holiday_week(when.week) ? 1.0 : 0.0;
        }

        double latent = 0.0;
        for (int i = burn; i < total; ++i) {
            auto& r = recs[static_cast<std::size_t>(i)];
            const auto& driver = recs[static_cast<std::size_t>(i - sc.lag_weeks)];
            const double cold = 3.0 * detail::softplus((t_mean - driver.tmin) / 3.0) / t_amp;
            const double seasonal =
                std::pow(0.5 * (1.0 + std::cos(two_pi * (r.when.week - cold_week - sc.lag_weeks) / kWeeksPerYear)), 3.0);
            double y = amp * (0.4 * seasonal + 0.6 * cold);
            if (sc.noise > 0.0) {
                latent = 0.9 * latent + sc.noise * std::sqrt(1.0 - 0.81) * normal(rng);
                y = y * std::exp(latent) + sc.noise * 0.1 * amp * normal(rng);
            }
            r.incidence = std::max(0.0, sc.baseline + y);
        }

        WeeklyPanel panel{synthetic_state_id(s), {recs.begin() + burn, recs.end()}, "synthetic"};
        validate_panel(panel);
        panels.push_back(std::move(panel));
    }
    return panels;
}

}  // namespace climcast
