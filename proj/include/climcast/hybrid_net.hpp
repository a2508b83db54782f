// SPDX-License-Identifier: Apache-2.0
//
// Stage-2 network: multi-scale convolution banks in parallel with a
// BiLSTM + self-attention + LSTM pathway, fused by a dense head with a skip
// connection. Optional per-state embeddings are appended to every input row
// and again at the fusion layer.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "climcast/errors.hpp"
#include "climcast/nn/checkpoint.hpp"
#include "climcast/nn/layers.hpp"
#include "climcast/nn/optim.hpp"
#include "climcast/nn/tensor.hpp"

namespace climcast {

struct NetConfig {
    std::size_t input_dim = 24;  // per-row window width, embedding excluded
    std::size_t seq_len = 16;
    std::vector<std::size_t> kernels{2, 4, 8};
    std::size_t conv1_filters = 128;
    std::size_t conv2_filters = 64;
    std::size_t bilstm_width = 64;  // m; each direction gets m/2
    std::size_t heads = 4;
    std::size_t head_lstm = 32;
    std::size_t dense1 = 64;
    std::size_t dense2 = 32;
    std::size_t n_states = 0;  // 0 disables state embeddings
    std::size_t embedding_dim = 16;
    double dropout_cnn = 0.2;
    double dropout_dense = 0.2;
    double dropout_rnn = 0.3;
    std::uint64_t init_seed = 7;

    bool uses_embedding() const { return n_states > 0; }
    std::size_t row_width() const { return input_dim + (uses_embedding() ? embedding_dim : 0); }

    /// Length of the flattened convolutional feature vector h_cnn.
    std::size_t cnn_features() const {
        std::size_t n = 0;
        for (auto k : kernels) {
            if (seq_len < 2 * k - 1) throw ShapeError("sequence too short for two convolutions of kernel " + std::to_string(k));
            n += (seq_len - 2 * (k - 1)) * conv2_filters;
        }
        return n;
    }
    std::size_t fusion_width() const { return cnn_features() + head_lstm + (uses_embedding() ? embedding_dim : 0); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NetConfig, input_dim, seq_len, kernels, conv1_filters, conv2_filters, bilstm_width, heads,
                                   head_lstm, dense1, dense2, n_states, embedding_dim, dropout_cnn, dropout_dense, dropout_rnn,
                                   init_seed)

/// Parameter groups a freeze plan can address.
inline const std::vector<std::string>& layer_groups() {
    static const std::vector<std::string> g{"conv", "bilstm", "attention", "head_lstm", "fusion", "output", "embedding"};
    return g;
}

struct FreezePlan {
    std::set<std::string> frozen{"conv", "bilstm", "attention", "head_lstm"};
    double learning_rate = 1e-4;
};

inline void to_json(nlohmann::json& j, const FreezePlan& f) { j = {{"frozen", f.frozen}, {"learning_rate", f.learning_rate}}; }
inline void from_json(const nlohmann::json& j, FreezePlan& f) {
    f.frozen = j.at("frozen").get<std::set<std::string>>();
    f.learning_rate = j.at("learning_rate").get<double>();
}

template <typename T>
class HybridNet {
public:
    HybridNet() = default;

    explicit HybridNet(const NetConfig& cfg) : cfg_(cfg) {
        if (cfg.seq_len == 0 || cfg.input_dim == 0) throw ShapeError("hybrid net: empty input");
        nn::Rng rng(cfg.init_seed);
        const std::size_t width = cfg.row_width();
        if (cfg.uses_embedding()) embedding_ = nn::Embedding<T>("state_embedding", "embedding", cfg.n_states, cfg.embedding_dim, rng);
        for (auto k : cfg.kernels) {
            const std::string base = "conv_k" + std::to_string(k);
            conv1_.emplace_back(base + "_1", "conv", width, k, cfg.conv1_filters, true, rng);
            conv2_.emplace_back(base + "_2", "conv", cfg.conv1_filters, k, cfg.conv2_filters, true, rng);
        }
        bilstm_ = nn::BiLstm<T>("bilstm", "bilstm", width, cfg.bilstm_width, rng);
        attention_ = nn::MultiHeadSelfAttention<T>("attention", "attention", cfg.bilstm_width, cfg.heads, rng);
        head_lstm_ = nn::Lstm<T>("head_lstm", "head_lstm", cfg.bilstm_width, cfg.head_lstm, false, rng);
        dense1_ = nn::Dense<T>("fusion_dense1", "fusion", cfg.fusion_width(), cfg.dense1, true, true, rng);
        dense2_ = nn::Dense<T>("fusion_dense2", "fusion", cfg.dense1, cfg.dense2, true, true, rng);
        skip_ = nn::Dense<T>("fusion_skip", "fusion", cfg.dense1, cfg.dense2, false, false, rng);
        out_ = nn::Dense<T>("output", "output", cfg.dense2, 1, false, true, rng);
        drop_cnn_ = nn::Dropout<T>(cfg.dropout_cnn);
        drop_rnn_ = nn::Dropout<T>(cfg.dropout_rnn);
        drop_d1_ = nn::Dropout<T>(cfg.dropout_dense);
        drop_d2_ = nn::Dropout<T>(cfg.dropout_dense);
    }

    HybridNet(const HybridNet&) = default;
    HybridNet& operator=(const HybridNet&) = default;

    const NetConfig& config() const { return cfg_; }

    /// Replaces dropout rates (e.g. 0 to switch MC sampling off) without touching weights.
    void set_dropout(double cnn, double dense, double rnn) {
        drop_cnn_ = nn::Dropout<T>(cnn);
        drop_d1_ = nn::Dropout<T>(dense);
        drop_d2_ = nn::Dropout<T>(dense);
        drop_rnn_ = nn::Dropout<T>(rnn);
        cfg_.dropout_cnn = cnn;
        cfg_.dropout_dense = dense;
        cfg_.dropout_rnn = rnn;
    }

    bool has_dropout() const { return cfg_.dropout_cnn > 0.0 || cfg_.dropout_dense > 0.0 || cfg_.dropout_rnn > 0.0; }

    /// Forward pass over a batch B x seq_len x input_dim. `states` holds one embedding row
    /// index per batch item when embeddings are enabled. Returns B scaled predictions.
    nn::Tensor<T> forward(const nn::Tensor<T>& x, const std::vector<std::size_t>& states, bool training, nn::Rng& rng) {
        nn::require_shape(x, 3, "hybrid net");
        if (x.dim(1) != cfg_.seq_len || x.dim(2) != cfg_.input_dim)
            throw ShapeError("hybrid net: window is " + nn::shape_str(x.shape()) + ", expected Bx" + std::to_string(cfg_.seq_len) +
                             "x" + std::to_string(cfg_.input_dim));
        const std::size_t b = x.dim(0), len = cfg_.seq_len, d = cfg_.input_dim;
        batch_ = b;

        nn::Tensor<T> xin = x;
        nn::Tensor<T> emb;
        if (cfg_.uses_embedding()) {
            if (states.size() != b) throw InvalidArgument("hybrid net: one state index per window required");
            emb = embedding_.forward(states);
            const std::size_t de = cfg_.embedding_dim, w = d + de;
            xin = nn::Tensor<T>({b, len, w});
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t t = 0; t < len; ++t) {
                    std::copy_n(x.data() + (bi * len + t) * d, d, xin.data() + (bi * len + t) * w);
                    std::copy_n(emb.data() + bi * de, de, xin.data() + (bi * len + t) * w + d);
                }
        }

        // Convolutional pathway.
        const std::size_t n_cnn = cfg_.cnn_features();
        nn::Tensor<T> h_cnn({b, n_cnn});
        conv_sizes_.clear();
        std::size_t off = 0;
        for (std::size_t k = 0; k < conv1_.size(); ++k) {
            const auto u = conv2_[k].forward(conv1_[k].forward(xin));
            const std::size_t per = u.size() / b;
            conv_sizes_.push_back(per);
            for (std::size_t bi = 0; bi < b; ++bi) std::copy_n(u.data() + bi * per, per, h_cnn.data() + bi * n_cnn + off);
            off += per;
        }
        const auto h_cnn_d = drop_cnn_.forward(h_cnn, training, rng);

        // Recurrent pathway: S' = S + MHA(S,S,S), then the head LSTM's final state.
        auto s = bilstm_.forward(xin);
        const auto a = attention_.forward(s);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += a[i];
        const auto hh = head_lstm_.forward(s);
        const std::size_t hr = cfg_.head_lstm;
        nn::Tensor<T> h_rnn({b, hr});
        for (std::size_t bi = 0; bi < b; ++bi) std::copy_n(hh.data() + (bi * len + len - 1) * hr, hr, h_rnn.data() + bi * hr);
        const auto h_rnn_d = drop_rnn_.forward(h_rnn, training, rng);

        // Fusion z = [h_cnn || h_rnn || e_s].
        const std::size_t nz = cfg_.fusion_width();
        nn::Tensor<T> z({b, nz});
        for (std::size_t bi = 0; bi < b; ++bi) {
            T* row = z.data() + bi * nz;
            std::copy_n(h_cnn_d.data() + bi * n_cnn, n_cnn, row);
            std::copy_n(h_rnn_d.data() + bi * hr, hr, row + n_cnn);
            if (cfg_.uses_embedding()) std::copy_n(emb.data() + bi * cfg_.embedding_dim, cfg_.embedding_dim, row + n_cnn + hr);
        }
        const auto a1 = drop_d1_.forward(dense1_.forward(z), training, rng);
        auto a2 = dense2_.forward(a1);
        const auto sk = skip_.forward(a1);
        for (std::size_t i = 0; i < a2.size(); ++i) a2[i] += sk[i];
        const auto a2d = drop_d2_.forward(a2, training, rng);
        auto y = out_.forward(a2d);
        y.reshape({b});
        return y;
    }

    /// Backpropagates dL/dy (length B) from the last forward call into parameter gradients.
    void backward(const nn::Tensor<T>& dy) {
        const std::size_t b = batch_, len = cfg_.seq_len, d = cfg_.input_dim;
        if (dy.size() != b) throw ShapeError("hybrid net backward: gradient length mismatch");
        nn::Tensor<T> dyo = dy;
        dyo.reshape({b, 1});
        const auto da2 = drop_d2_.backward(out_.backward(dyo));
        auto da1 = dense2_.backward(da2);
        const auto da1s = skip_.backward(da2);
        for (std::size_t i = 0; i < da1.size(); ++i) da1[i] += da1s[i];
        const auto dz = dense1_.backward(drop_d1_.backward(da1));

        const std::size_t n_cnn = cfg_.cnn_features(), hr = cfg_.head_lstm, nz = cfg_.fusion_width();
        nn::Tensor<T> dh_cnn({b, n_cnn}), dh_rnn({b, hr});
        nn::Tensor<T> demb;
        if (cfg_.uses_embedding()) demb = nn::Tensor<T>({b, cfg_.embedding_dim});
        for (std::size_t bi = 0; bi < b; ++bi) {
            const T* row = dz.data() + bi * nz;
            std::copy_n(row, n_cnn, dh_cnn.data() + bi * n_cnn);
            std::copy_n(row + n_cnn, hr, dh_rnn.data() + bi * hr);
            if (cfg_.uses_embedding()) std::copy_n(row + n_cnn + hr, cfg_.embedding_dim, demb.data() + bi * cfg_.embedding_dim);
        }

        const std::size_t w = cfg_.row_width();
        nn::Tensor<T> dxin({b, len, w});

        // Recurrent pathway.
        const auto dhr = drop_rnn_.backward(dh_rnn);
        nn::Tensor<T> dhh({b, len, hr});
        for (std::size_t bi = 0; bi < b; ++bi) std::copy_n(dhr.data() + bi * hr, hr, dhh.data() + (bi * len + len - 1) * hr);
        auto ds = head_lstm_.backward(dhh);
        const auto ds_att = attention_.backward(ds);
        for (std::size_t i = 0; i < ds.size(); ++i) ds[i] += ds_att[i];
        const auto dx_rnn = bilstm_.backward(ds);
        for (std::size_t i = 0; i < dxin.size(); ++i) dxin[i] += dx_rnn[i];

        // Convolutional pathway.
        const auto dhc = drop_cnn_.backward(dh_cnn);
        std::size_t off = 0;
        for (std::size_t k = 0; k < conv1_.size(); ++k) {
            const std::size_t per = conv_sizes_[k];
            const std::size_t tk = per / cfg_.conv2_filters;
            nn::Tensor<T> du({b, tk, cfg_.conv2_filters});
            for (std::size_t bi = 0; bi < b; ++bi) std::copy_n(dhc.data() + bi * n_cnn + off, per, du.data() + bi * per);
            const auto dx_k = conv1_[k].backward(conv2_[k].backward(du));
            for (std::size_t i = 0; i < dxin.size(); ++i) dxin[i] += dx_k[i];
            off += per;
        }

        if (cfg_.uses_embedding()) {
            const std::size_t de = cfg_.embedding_dim;
            for (std::size_t bi = 0; bi < b; ++bi)
                for (std::size_t t = 0; t < len; ++t)
                    for (std::size_t j = 0; j < de; ++j) demb[bi * de + j] += dxin[(bi * len + t) * w + d + j];
            embedding_.backward(demb);
        }
    }

    std::vector<nn::Param<T>*> params() {
        std::vector<nn::Param<T>*> p;
        auto add = [&](std::vector<nn::Param<T>*> q) { p.insert(p.end(), q.begin(), q.end()); };
        if (cfg_.uses_embedding()) add(embedding_.params());
        for (std::size_t k = 0; k < conv1_.size(); ++k) {
            add(conv1_[k].params());
            add(conv2_[k].params());
        }
        add(bilstm_.params());
        add(attention_.params());
        add(head_lstm_.params());
        add(dense1_.params());
        add(dense2_.params());
        add(skip_.params());
        add(out_.params());
        return p;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : params()) n += p->value.size();
        return n;
    }

    /// Marks every parameter trainable except those in the plan's frozen groups.
    void apply_freeze_plan(const FreezePlan& plan) {
        for (const auto& g : plan.frozen)
            if (std::find(layer_groups().begin(), layer_groups().end(), g) == layer_groups().end())
                throw InvalidArgument("unknown layer group in freeze plan: " + g);
        std::size_t trainable = 0;
        for (auto* p : params()) {
            p->trainable = plan.frozen.count(p->group) == 0;
            if (p->trainable) trainable += p->value.size();
        }
        if (trainable == 0) throw InvalidArgument("freeze plan leaves no trainable parameters");
    }

    void unfreeze_all() {
        for (auto* p : params()) p->trainable = true;
    }

    /// Fraction of parameters (by count) currently frozen.
    double frozen_fraction() {
        std::size_t frozen = 0, total = 0;
        for (auto* p : params()) {
            total += p->value.size();
            if (!p->trainable) frozen += p->value.size();
        }
        return total ? static_cast<double>(frozen) / static_cast<double>(total) : 0.0;
    }

    /// Adds an embedding row initialized to the mean of existing rows; returns its index.
    std::size_t add_state() {
        if (!cfg_.uses_embedding()) throw InvalidArgument("network was built without state embeddings");
        const auto idx = embedding_.add_mean_row();
        cfg_.n_states = embedding_.rows();
        return idx;
    }

    const nn::Param<T>& embedding_table() const { return embedding_.table(); }

    std::vector<std::vector<T>> snapshot() {
        std::vector<std::vector<T>> s;
        for (auto* p : params()) s.push_back(p->value.values());
        return s;
    }
    void restore(const std::vector<std::vector<T>>& s) {
        auto ps = params();
        if (s.size() != ps.size()) throw ShapeError("snapshot does not match network");
        for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value.values() = s[i];
    }

private:
    NetConfig cfg_;
    std::size_t batch_ = 0;
    nn::Embedding<T> embedding_;
    std::vector<nn::Conv1D<T>> conv1_, conv2_;
    std::vector<std::size_t> conv_sizes_;
    nn::BiLstm<T> bilstm_;
    nn::MultiHeadSelfAttention<T> attention_;
    nn::Lstm<T> head_lstm_;
    nn::Dense<T> dense1_, dense2_, skip_, out_;
    nn::Dropout<T> drop_cnn_, drop_rnn_, drop_d1_, drop_d2_;
};

// ---------------------------------------------------------------------------
// Training

/// Windows stacked as N x seq_len x input_dim with scaled targets.
template <typename T>
struct WindowSet {
    nn::Tensor<T> x;
    std::vector<double> y;
    std::vector<std::size_t> state;         // embedding row per window (ignored without embeddings)
    std::vector<std::size_t> target_index;  // panel index of each target
    std::vector<std::string> state_id;

    std::size_t size() const { return y.size(); }

    WindowSet subset(const std::vector<std::size_t>& rows) const {
        WindowSet out;
        if (rows.empty()) return out;
        const std::size_t len = x.dim(1), d = x.dim(2), per = len * d;
        out.x = nn::Tensor<T>({rows.size(), len, d});
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::copy_n(x.data() + rows[i] * per, per, out.x.data() + i * per);
            out.y.push_back(y[rows[i]]);
            out.state.push_back(state[rows[i]]);
            out.target_index.push_back(target_index[rows[i]]);
            out.state_id.push_back(state_id[rows[i]]);
        }
        return out;
    }

    void append(const WindowSet& other) {
        if (other.size() == 0) return;
        if (size() == 0) {
            *this = other;
            return;
        }
        if (other.x.dim(1) != x.dim(1) || other.x.dim(2) != x.dim(2)) throw ShapeError("window sets differ in shape");
        nn::Tensor<T> merged({size() + other.size(), x.dim(1), x.dim(2)});
        std::copy(x.values().begin(), x.values().end(), merged.data());
        std::copy(other.x.values().begin(), other.x.values().end(), merged.data() + x.size());
        x = std::move(merged);
        y.insert(y.end(), other.y.begin(), other.y.end());
        state.insert(state.end(), other.state.begin(), other.state.end());
        target_index.insert(target_index.end(), other.target_index.begin(), other.target_index.end());
        state_id.insert(state_id.end(), other.state_id.begin(), other.state_id.end());
    }
};

struct TrainConfig {
    int max_epochs = 60;
    int patience = 10;
    std::size_t batch_size = 16;
    double learning_rate = 6e-4;
    double lr_floor_frac = 0.01;
    double clip_norm = 1.0;
    std::uint64_t seed = 7;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, max_epochs, patience, batch_size, learning_rate, lr_floor_frac, clip_norm, seed)

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    int best_epoch = -1;
    double best_val = std::numeric_limits<double>::infinity();
    bool early_stopped = false;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainHistory, train_loss, val_loss, best_epoch, best_val, early_stopped)

/// Deterministic (dropout-off) predictions for every window, in scaled space.
template <typename T>
std::vector<double> predict_windows(HybridNet<T>& net, const WindowSet<T>& set, std::size_t batch = 64) {
    std::vector<double> out;
    nn::Rng rng(0);
    const std::size_t len = set.x.dim(1), d = set.x.dim(2), per = len * d;
    for (std::size_t start = 0; start < set.size(); start += batch) {
        const std::size_t n = std::min(batch, set.size() - start);
        nn::Tensor<T> xb({n, len, d});
        std::copy_n(set.x.data() + start * per, n * per, xb.data());
        std::vector<std::size_t> st(set.state.begin() + static_cast<std::ptrdiff_t>(start),
                                    set.state.begin() + static_cast<std::ptrdiff_t>(start + n));
        const auto y = net.forward(xb, st, false, rng);
        for (std::size_t i = 0; i < n; ++i) out.push_back(static_cast<double>(y[i]));
    }
    return out;
}

template <typename T>
double mse_on(HybridNet<T>& net, const WindowSet<T>& set) {
    if (set.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    const auto p = predict_windows(net, set);
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - set.y[i]) * (p[i] - set.y[i]);
    return s / static_cast<double>(p.size());
}

/// Minibatch MSE training with Adam, per-epoch cosine learning rate, global-norm
/// clipping and early stopping on `val` (best weights restored). Only trainable
/// parameters move. With an empty validation set, runs all epochs.
template <typename T>
TrainHistory fit_network(HybridNet<T>& net, const WindowSet<T>& train, const WindowSet<T>& val, const TrainConfig& cfg) {
    if (train.size() == 0) throw InvalidArgument("fit_network: no training windows");
    TrainHistory hist;
    if (cfg.max_epochs <= 0) return hist;
    auto params = net.params();
    nn::AdamState<T> adam(params);
    nn::Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t len = train.x.dim(1), d = train.x.dim(2), per = len * d;
    auto best = net.snapshot();
    int since_best = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = nn::cosine_lr(epoch, cfg.max_epochs, cfg.learning_rate, cfg.lr_floor_frac);
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - start);
            nn::Tensor<T> xb({n, len, d});
            std::vector<std::size_t> st(n);
            std::vector<double> yb(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = order[start + i];
                std::copy_n(train.x.data() + r * per, per, xb.data() + i * per);
                st[i] = train.state[r];
                yb[i] = train.y[r];
            }
            nn::zero_grad(params);
            const auto pred = net.forward(xb, st, true, rng);
            nn::Tensor<T> dy({n});
            for (std::size_t i = 0; i < n; ++i) {
                const double e = static_cast<double>(pred[i]) - yb[i];
                loss_sum += e * e;
                dy[i] = static_cast<T>(2.0 * e / static_cast<double>(n));
            }
            if (!std::isfinite(loss_sum)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
            net.backward(dy);
            nn::clip_global_norm(params, cfg.clip_norm);
            nn::adam_step(params, adam, lr);
        }
        hist.train_loss.push_back(loss_sum / static_cast<double>(order.size()));

        if (val.size() == 0) {
            hist.best_epoch = epoch;
            continue;
        }
        const double v = mse_on(net, val);
        if (!std::isfinite(v)) throw NumericError("validation loss became non-finite at epoch " + std::to_string(epoch));
        hist.val_loss.push_back(v);
        if (v < hist.best_val) {
            hist.best_val = v;
            hist.best_epoch = epoch;
            best = net.snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            hist.early_stopped = true;
            break;
        }
    }
    if (val.size() > 0) net.restore(best);
    return hist;
}

}  // namespace climcast
