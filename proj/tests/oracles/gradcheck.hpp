// Central finite-difference checks for the nn layers and the full hybrid network.
//
// Each check draws a random small instance, randomizes every parameter (biases
// included), and compares analytic gradients of L = sum(w * out) with central
// differences for all parameter coordinates (up to `max_coords` per tensor) and
// all input coordinates.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "climcast/hybrid_net.hpp"
#include "climcast/nn/layers.hpp"

namespace oracle {

using climcast::nn::Param;
using climcast::nn::Rng;
using climcast::nn::Tensor;

inline constexpr double kFdStep = 1e-5;
inline constexpr double kRelFloor = 1e-5;

/// |a - n| / max(|a| + |n|, floor).
inline double rel_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), kRelFloor);
}

struct GradReport {
    double max_rel = 0.0;
    std::string worst;
    std::size_t checked = 0;

    void note(double r, const std::string& where) {
        ++checked;
        if (r > max_rel) {
            max_rel = r;
            worst = where;
        }
    }
};

inline Tensor<double> random_tensor(std::vector<std::size_t> shape, Rng& rng, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

inline void randomize(const std::vector<Param<double>*>& ps, Rng& rng, double scale = 0.5) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto* p : ps)
        for (auto& v : p->value.values()) v = u(rng);
}

/// `forward` maps the input to an output tensor; `backward` maps dL/dout to dL/dx and
/// accumulates parameter gradients.
inline GradReport check_gradients(const std::function<Tensor<double>(const Tensor<double>&)>& forward,
                                  const std::function<Tensor<double>(const Tensor<double>&)>& backward,
                                  const std::vector<Param<double>*>& params, Tensor<double> x, Rng& rng,
                                  std::size_t max_coords = 1u << 30, bool check_input = true) {
    const auto out0 = forward(x);
    const auto w = random_tensor(out0.shape(), rng);
    auto loss = [&](const Tensor<double>& in) {
        const auto o = forward(in);
        double s = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) s += w[i] * o[i];
        return s;
    };

    for (auto* p : params) p->zero_grad();
    forward(x);
    const auto dx = backward(w);

    GradReport rep;
    for (auto* p : params) {
        const auto analytic = p->grad.values();
        std::vector<std::size_t> coords(p->value.size());
        for (std::size_t j = 0; j < coords.size(); ++j) coords[j] = j;
        if (coords.size() > max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(max_coords);
        }
        for (auto j : coords) {
            const double keep = p->value[j];
            p->value[j] = keep + kFdStep;
            const double lp = loss(x);
            p->value[j] = keep - kFdStep;
            const double lm = loss(x);
            p->value[j] = keep;
            rep.note(rel_error(analytic[j], (lp - lm) / (2.0 * kFdStep)), p->name + "[" + std::to_string(j) + "]");
        }
    }
    if (check_input) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double keep = x[j];
            x[j] = keep + kFdStep;
            const double lp = loss(x);
            x[j] = keep - kFdStep;
            const double lm = loss(x);
            x[j] = keep;
            rep.note(rel_error(dx[j], (lp - lm) / (2.0 * kFdStep)), "input[" + std::to_string(j) + "]");
        }
    }
    return rep;
}

inline std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline GradReport check_conv(std::uint64_t seed, std::size_t kernel) {
    Rng rng(seed);
    const std::size_t b = draw(rng, 1, 3), t = kernel + draw(rng, 0, 4), c = draw(rng, 1, 4), f = draw(rng, 1, 5);
    climcast::nn::Conv1D<double> layer("conv", "conv", c, kernel, f, true, rng);
    randomize(layer.params(), rng);
    return check_gradients([&](const Tensor<double>& x) { return layer.forward(x); },
                           [&](const Tensor<double>& dy) { return layer.backward(dy); }, layer.params(),
                           random_tensor({b, t, c}, rng), rng);
}

inline GradReport check_dense(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t b = draw(rng, 1, 4), in = draw(rng, 1, 6), out = draw(rng, 1, 6);
    const bool relu = draw(rng, 0, 1) == 1, bias = draw(rng, 0, 1) == 1;
    climcast::nn::Dense<double> layer("dense", "fusion", in, out, relu, bias, rng);
    randomize(layer.params(), rng);
    return check_gradients([&](const Tensor<double>& x) { return layer.forward(x); },
                           [&](const Tensor<double>& dy) { return layer.backward(dy); }, layer.params(),
                           random_tensor({b, in}, rng), rng);
}

inline GradReport check_lstm(std::uint64_t seed, bool reverse) {
    Rng rng(seed);
    const std::size_t b = draw(rng, 1, 3), t = draw(rng, 2, 6), in = draw(rng, 1, 4), h = draw(rng, 1, 4);
    climcast::nn::Lstm<double> layer("lstm", "head_lstm", in, h, reverse, rng);
    randomize(layer.params(), rng);
    return check_gradients([&](const Tensor<double>& x) { return layer.forward(x); },
                           [&](const Tensor<double>& dy) { return layer.backward(dy); }, layer.params(),
                           random_tensor({b, t, in}, rng), rng);
}

inline GradReport check_bilstm(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t b = draw(rng, 1, 3), t = draw(rng, 2, 6), in = draw(rng, 1, 4), width = 2 * draw(rng, 1, 3);
    climcast::nn::BiLstm<double> layer("bilstm", "bilstm", in, width, rng);
    randomize(layer.params(), rng);
    return check_gradients([&](const Tensor<double>& x) { return layer.forward(x); },
                           [&](const Tensor<double>& dy) { return layer.backward(dy); }, layer.params(),
                           random_tensor({b, t, in}, rng), rng);
}

inline GradReport check_attention(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t heads = 4, b = draw(rng, 1, 2), t = draw(rng, 2, 5), width = heads * draw(rng, 1, 2);
    climcast::nn::MultiHeadSelfAttention<double> layer("attention", "attention", width, heads, rng);
    randomize(layer.params(), rng);
    return check_gradients([&](const Tensor<double>& x) { return layer.forward(x); },
                           [&](const Tensor<double>& dy) { return layer.backward(dy); }, layer.params(),
                           random_tensor({b, t, width}, rng), rng);
}

/// Small hybrid net on a 2 x 16 x 6 batch. With `dropout`, every forward pass reuses the
/// same mask stream so the loss stays a deterministic function of the weights.
inline GradReport check_hybrid(std::uint64_t seed, bool embeddings, bool dropout) {
    Rng rng(seed);
    climcast::NetConfig cfg;
    cfg.input_dim = 6;
    cfg.seq_len = 16;
    cfg.conv1_filters = 3;
    cfg.conv2_filters = 2;
    cfg.bilstm_width = 4;
    cfg.heads = 4;
    cfg.head_lstm = 3;
    cfg.dense1 = 5;
    cfg.dense2 = 4;
    cfg.embedding_dim = 3;
    cfg.n_states = embeddings ? 3 : 0;
    cfg.init_seed = seed;
    if (!dropout) cfg.dropout_cnn = cfg.dropout_dense = cfg.dropout_rnn = 0.0;
    climcast::HybridNet<double> net(cfg);
    randomize(net.params(), rng, 0.4);
    const std::vector<std::size_t> states = embeddings ? std::vector<std::size_t>{2, 0} : std::vector<std::size_t>{};
    const std::uint64_t mask_seed = seed ^ 0x9e3779b97f4a7c15ull;
    return check_gradients(
        [&](const Tensor<double>& x) {
            Rng mask_rng(mask_seed);
            return net.forward(x, states, dropout, mask_rng);
        },
        [&](const Tensor<double>& dy) {
            net.backward(dy);
            return Tensor<double>(std::vector<std::size_t>{2, 16, 6});
        },
        net.params(), random_tensor({2, 16, 6}, rng), rng, 40, false);
}

}  // namespace oracle
