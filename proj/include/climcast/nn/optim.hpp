// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "climcast/nn/tensor.hpp"

namespace climcast::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moments shaped like the parameter list they were created for.
template <typename T>
struct AdamState {
    AdamConfig config;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    long step = 0;

    AdamState() = default;
    explicit AdamState(const std::vector<Param<T>*>& params, AdamConfig cfg = {}) : config(cfg) {
        for (const auto* p : params) {
            m.emplace_back(p->value.shape());
            v.emplace_back(p->value.shape());
        }
    }
};

/// One bias-corrected Adam update of every trainable parameter.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state, double lr) {
    if (state.m.size() != params.size()) throw ShapeError("adam state does not match parameter list");
    ++state.step;
    const auto& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = *params[i];
        if (!p.trainable) continue;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = static_cast<double>(p.grad[j]);
            const double mj = c.beta1 * static_cast<double>(m[j]) + (1.0 - c.beta1) * g;
            const double vj = c.beta2 * static_cast<double>(v[j]) + (1.0 - c.beta2) * g * g;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double upd = lr * (mj / bc1) / (std::sqrt(vj / bc2) + c.epsilon);
            p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - upd);
        }
    }
}

/// Cosine annealing from `base` at step 0 to `floor_frac * base` at `horizon`.
inline double cosine_lr(long step, long horizon, double base = 6e-4, double floor_frac = 0.01) {
    if (horizon <= 0) return base;
    const double progress = std::min(1.0, static_cast<double>(std::max(0L, step)) / static_cast<double>(horizon));
    const double floor = floor_frac * base;
    return floor + 0.5 * (base - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

/// Rescales trainable gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping; throws on non-finite gradients.
template <typename T>
double clip_global_norm(const std::vector<Param<T>*>& params, double max_norm) {
    double sq = 0.0;
    for (const auto* p : params) {
        if (!p->trainable) continue;
        for (const T& g : p->grad.values()) sq += static_cast<double>(g) * static_cast<double>(g);
    }
    const double norm = std::sqrt(sq);
    if (!std::isfinite(norm)) {
        std::string bad;
        for (const auto* p : params)
            if (p->trainable && !p->grad.all_finite()) bad += " " + p->name;
        throw NumericError("non-finite gradient in:" + bad);
    }
    if (norm > max_norm && norm > 0.0) {
        const T scale = static_cast<T>(max_norm / norm);
        for (auto* p : params)
            if (p->trainable)
                for (T& g : p->grad.values()) g *= scale;
    }
    return norm;
}

template <typename T>
void zero_grad(const std::vector<Param<T>*>& params) {
    for (auto* p : params) p->zero_grad();
}

}  // namespace climcast::nn
