// Brute-force reference implementations for the metrics module.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline double mse(const std::vector<double>& y, const std::vector<double>& p) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) s += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
    return static_cast<double>(s / y.size());
}

inline double r2(const std::vector<double>& y, const std::vector<double>& p) {
    long double m = 0.0L;
    for (double v : y) m += v;
    m /= y.size();
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += (y[i] - static_cast<long double>(p[i])) * (y[i] - static_cast<long double>(p[i]));
        den += (y[i] - m) * (y[i] - m);
    }
    return static_cast<double>(1.0L - num / den);
}

inline double mare(const std::vector<double>& y, const std::vector<double>& p) {
    long double num = 0.0L, den = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) {
        num += std::fabs(static_cast<long double>(y[i]) - p[i]);
        den += y[i];
    }
    return static_cast<double>(num / std::max(den, 1e-8L));
}

/// Weighted circular mean week via a complex resultant, mapped to (0, 52].
inline double cog(const std::vector<int>& weeks, const std::vector<double>& mass) {
    std::complex<long double> z = 0.0L;
    for (std::size_t i = 0; i < weeks.size(); ++i)
        z += static_cast<long double>(mass[i]) * std::polar(1.0L, 2.0L * std::numbers::pi_v<long double> * weeks[i] / 52.0L);
    long double w = std::arg(z) * 52.0L / (2.0L * std::numbers::pi_v<long double>);
    while (w <= 0.0L) w += 52.0L;
    while (w > 52.0L) w -= 52.0L;
    return static_cast<double>(w);
}

inline double percentile_sorted(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct BootstrapRef {
    std::vector<double> deltas;
    double mean = 0.0, lo = 0.0, hi = 0.0;
    double slog_mean = 0.0, slog_lo = 0.0, slog_hi = 0.0;
    double win = 0.0;
};

/// Second resampler: draws state indices with the same engine and multiply-high
/// reduction, then recomputes every summary from the stored draws.
inline BootstrapRef bootstrap(const std::vector<double>& a, const std::vector<double>& b, std::size_t iters, std::uint64_t seed,
                              bool lower_better) {
    std::mt19937_64 eng(seed);
    const std::size_t n = a.size();
    BootstrapRef r;
    std::vector<std::size_t> idx(n);
    for (std::size_t it = 0; it < iters; ++it) {
        for (auto& i : idx) {
            const unsigned __int128 prod = static_cast<unsigned __int128>(eng()) * static_cast<unsigned __int128>(n);
            i = static_cast<std::size_t>(prod >> 64);
        }
        double sa = 0.0, sb = 0.0;
        for (auto i : idx) sa += a[i];
        for (auto i : idx) sb += b[i];
        r.deltas.push_back(sa / static_cast<double>(n) - sb / static_cast<double>(n));
    }
    std::vector<double> slog;
    double wins = 0.0, sum = 0.0, ssum = 0.0;
    for (double d : r.deltas) {
        const double s = d == 0.0 ? 0.0 : (d > 0.0 ? 1.0 : -1.0) * std::log(std::fabs(d));
        slog.push_back(s);
        sum += d;
        ssum += s;
        if (d == 0.0) wins += 0.5;
        else if (lower_better ? d < 0.0 : d > 0.0) wins += 1.0;
    }
    r.mean = sum / static_cast<double>(iters);
    r.slog_mean = ssum / static_cast<double>(iters);
    r.lo = percentile_sorted(r.deltas, 0.025);
    r.hi = percentile_sorted(r.deltas, 0.975);
    r.slog_lo = percentile_sorted(slog, 0.025);
    r.slog_hi = percentile_sorted(slog, 0.975);
    r.win = wins / static_cast<double>(iters);
    return r;
}

}  // namespace oracle
