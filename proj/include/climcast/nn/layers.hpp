// SPDX-License-Identifier: Apache-2.0
//
// Layers with explicit forward/backward passes. Each layer caches what its
// backward pass needs from the most recent forward call, so an instance is
// single-writer. Backward accumulates into Param::grad and returns the
// gradient with respect to the layer input.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "climcast/nn/tensor.hpp"

namespace climcast::nn {

template <typename T>
T sigmoid(T x) {
    return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

/// Valid 1-D cross-correlation along time: B x T x C -> B x (T-k+1) x F, optional ReLU.
template <typename T>
class Conv1D {
public:
    Conv1D() = default;
    Conv1D(const std::string& name, const std::string& group, std::size_t in_channels, std::size_t kernel, std::size_t filters,
           bool relu, Rng& rng)
        : in_(in_channels), k_(kernel), f_(filters), relu_(relu),
          w_(name + ".kernel", group, {kernel * in_channels, filters}), b_(name + ".bias", group, {filters}) {
        if (kernel == 0 || filters == 0 || in_channels == 0) throw ShapeError("conv1d: zero-sized dimension");
        glorot_uniform(w_.value, kernel * in_channels, kernel * filters, rng);
    }

    std::size_t output_length(std::size_t t) const { return t - k_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_shape(x, 3, "conv1d");
        const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
        if (c != in_) throw ShapeError("conv1d: expected " + std::to_string(in_) + " channels, got " + std::to_string(c));
        if (t < k_) throw ShapeError("conv1d: sequence length " + std::to_string(t) + " shorter than kernel " + std::to_string(k_));
        in_shape_ = x.shape();
        const std::size_t to = t - k_ + 1;
        const std::size_t width = k_ * c;
        cols_.resize(static_cast<Eigen::Index>(b * to), static_cast<Eigen::Index>(width));
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t p = 0; p < to; ++p)
                std::copy_n(x.data() + (bi * t + p) * c, width, cols_.row(static_cast<Eigen::Index>(bi * to + p)).data());

        Tensor<T> y({b, to, f_});
        auto ym = y.matrix();
        ym.noalias() = cols_ * w_.value.matrix();
        ym.rowwise() += b_.value.matrix().row(0);
        if (relu_) ym = ym.cwiseMax(T(0));
        out_ = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t b = in_shape_[0], t = in_shape_[1], c = in_shape_[2];
        const std::size_t to = t - k_ + 1;
        if (dy.shape() != out_.shape()) throw ShapeError("conv1d backward: gradient shape mismatch");
        Mat<T> dz = dy.matrix();
        if (relu_) dz = (out_.matrix().array() > T(0)).select(dz, T(0));
        w_.grad.matrix().noalias() += cols_.transpose() * dz;
        b_.grad.matrix().row(0) += dz.colwise().sum();
        const Mat<T> dcols = dz * w_.value.matrix().transpose();

        Tensor<T> dx(in_shape_);
        const std::size_t width = k_ * c;
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t p = 0; p < to; ++p) {
                T* dst = dx.data() + (bi * t + p) * c;
                const T* src = dcols.row(static_cast<Eigen::Index>(bi * to + p)).data();
                for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
            }
        return dx;
    }

    std::vector<Param<T>*> params() { return {&w_, &b_}; }

private:
    std::size_t in_ = 0, k_ = 0, f_ = 0;
    bool relu_ = true;
    Param<T> w_, b_;
    std::vector<std::size_t> in_shape_;
    Mat<T> cols_;
    Tensor<T> out_;
};

/// Affine map over the last axis, optional ReLU. Accepts any rank; leading axes are batch.
template <typename T>
class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, const std::string& group, std::size_t in, std::size_t out, bool relu, bool bias, Rng& rng)
        : in_(in), out_dim_(out), relu_(relu), bias_(bias), w_(name + ".kernel", group, {in, out}) {
        if (bias_) b_ = Param<T>(name + ".bias", group, {out});
        glorot_uniform(w_.value, in, out, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape().back() != in_) throw ShapeError("dense: expected last axis " + std::to_string(in_) + ", got " + shape_str(x.shape()));
        x_ = x;
        auto shape = x.shape();
        shape.back() = out_dim_;
        Tensor<T> y(shape);
        auto ym = y.matrix();
        ym.noalias() = x.matrix() * w_.value.matrix();
        if (bias_) ym.rowwise() += b_.value.matrix().row(0);
        if (relu_) ym = ym.cwiseMax(T(0));
        y_ = y;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (dy.shape() != y_.shape()) throw ShapeError("dense backward: gradient shape mismatch");
        Mat<T> dz = dy.matrix();
        if (relu_) dz = (y_.matrix().array() > T(0)).select(dz, T(0));
        w_.grad.matrix().noalias() += x_.matrix().transpose() * dz;
        if (bias_) b_.grad.matrix().row(0) += dz.colwise().sum();
        Tensor<T> dx(x_.shape());
        dx.matrix().noalias() = dz * w_.value.matrix().transpose();
        return dx;
    }

    std::vector<Param<T>*> params() {
        if (bias_) return {&w_, &b_};
        return {&w_};
    }

private:
    std::size_t in_ = 0, out_dim_ = 0;
    bool relu_ = false;
    bool bias_ = true;
    Param<T> w_, b_;
    Tensor<T> x_, y_;
};

/// LSTM over B x T x In returning every hidden state (B x T x H). Gate order i, f, g, o.
/// With `reverse`, time is processed from the end; output stays aligned with input time.
template <typename T>
class Lstm {
public:
    Lstm() = default;
    Lstm(const std::string& name, const std::string& group, std::size_t in, std::size_t hidden, bool reverse, Rng& rng)
        : in_(in), h_(hidden), reverse_(reverse), wx_(name + ".kernel", group, {in, 4 * hidden}),
          wh_(name + ".recurrent_kernel", group, {hidden, 4 * hidden}), b_(name + ".bias", group, {4 * hidden}) {
        glorot_uniform(wx_.value, in, 4 * hidden, rng);
        glorot_uniform(wh_.value, hidden, 4 * hidden, rng);
        for (std::size_t j = hidden; j < 2 * hidden; ++j) b_.value[j] = T(1);  // forget gate
    }

    std::size_t hidden() const { return h_; }

    Tensor<T> forward(const Tensor<T>& x) {
        require_shape(x, 3, "lstm");
        if (x.dim(2) != in_) throw ShapeError("lstm: expected input width " + std::to_string(in_) + ", got " + shape_str(x.shape()));
        x_ = x;
        const std::size_t b = x.dim(0), t = x.dim(1), h = h_, g4 = 4 * h_;
        const auto eb = static_cast<Eigen::Index>(b);
        gates_ = Tensor<T>({b, t, g4});
        cell_ = Tensor<T>({b, t, h});
        tanh_cell_ = Tensor<T>({b, t, h});
        Tensor<T> out({b, t, h});

        auto gm = gates_.matrix();
        gm.noalias() = x.matrix() * wx_.value.matrix();
        gm.rowwise() += b_.value.matrix().row(0);

        const auto row_stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(t * g4));
        const auto h_stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(t * h));
        Mat<T> c_prev = Mat<T>::Zero(eb, static_cast<Eigen::Index>(h));
        Mat<T> h_prev = Mat<T>::Zero(eb, static_cast<Eigen::Index>(h));
        for (std::size_t s = 0; s < t; ++s) {
            const std::size_t ti = reverse_ ? t - 1 - s : s;
            StridedMap<T> a(gates_.data() + ti * g4, eb, static_cast<Eigen::Index>(g4), row_stride);
            if (s > 0) a.noalias() += h_prev * wh_.value.matrix();
            StridedMap<T> c(cell_.data() + ti * h, eb, static_cast<Eigen::Index>(h), h_stride);
            StridedMap<T> tc(tanh_cell_.data() + ti * h, eb, static_cast<Eigen::Index>(h), h_stride);
            StridedMap<T> ho(out.data() + ti * h, eb, static_cast<Eigen::Index>(h), h_stride);
            for (Eigen::Index bi = 0; bi < eb; ++bi) {
                T* gr = &a(bi, 0);
                for (std::size_t j = 0; j < h; ++j) {
                    const T ig = sigmoid(gr[j]);
                    const T fg = sigmoid(gr[h + j]);
                    const T cg = std::tanh(gr[2 * h + j]);
                    const T og = sigmoid(gr[3 * h + j]);
                    gr[j] = ig;
                    gr[h + j] = fg;
                    gr[2 * h + j] = cg;
                    gr[3 * h + j] = og;
                    const T cv = fg * c_prev(bi, static_cast<Eigen::Index>(j)) + ig * cg;
                    c(bi, static_cast<Eigen::Index>(j)) = cv;
                    const T tcv = std::tanh(cv);
                    tc(bi, static_cast<Eigen::Index>(j)) = tcv;
                    ho(bi, static_cast<Eigen::Index>(j)) = og * tcv;
                }
            }
            c_prev = c;
            h_prev = ho;
        }
        out_ = out;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        if (dout.shape() != out_.shape()) throw ShapeError("lstm backward: gradient shape mismatch");
        const std::size_t b = x_.dim(0), t = x_.dim(1), h = h_, g4 = 4 * h_;
        const auto eb = static_cast<Eigen::Index>(b);
        const auto eh = static_cast<Eigen::Index>(h);
        Tensor<T> dgates({b, t, g4});
        Mat<T> dh_next = Mat<T>::Zero(eb, eh);
        Mat<T> dc_next = Mat<T>::Zero(eb, eh);
        const auto row_stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(t * g4));
        const auto h_stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(t * h));
        for (std::size_t s = t; s-- > 0;) {
            const std::size_t ti = reverse_ ? t - 1 - s : s;
            const bool has_prev = s > 0;
            const std::size_t tp = reverse_ ? ti + 1 : ti - 1;
            ConstStridedMap<T> a(gates_.data() + ti * g4, eb, static_cast<Eigen::Index>(g4), row_stride);
            ConstStridedMap<T> tc(tanh_cell_.data() + ti * h, eb, eh, h_stride);
            ConstStridedMap<T> dho(dout.data() + ti * h, eb, eh, h_stride);
            StridedMap<T> da(dgates.data() + ti * g4, eb, static_cast<Eigen::Index>(g4), row_stride);
            for (Eigen::Index bi = 0; bi < eb; ++bi) {
                const T* gr = a.data() + bi * a.outerStride();
                T* dr = &da(bi, 0);
                for (std::size_t j = 0; j < h; ++j) {
                    const auto ej = static_cast<Eigen::Index>(j);
                    const T ig = gr[j], fg = gr[h + j], cg = gr[2 * h + j], og = gr[3 * h + j];
                    const T c_prev = has_prev ? cell_.at(static_cast<std::size_t>(bi), tp, j) : T(0);
                    const T dh = dho(bi, ej) + dh_next(bi, ej);
                    const T tcv = tc(bi, ej);
                    const T dc = dh * og * (T(1) - tcv * tcv) + dc_next(bi, ej);
                    dr[j] = dc * cg * ig * (T(1) - ig);
                    dr[h + j] = dc * c_prev * fg * (T(1) - fg);
                    dr[2 * h + j] = dc * ig * (T(1) - cg * cg);
                    dr[3 * h + j] = dh * tcv * og * (T(1) - og);
                    dc_next(bi, ej) = dc * fg;
                }
            }
            if (has_prev) {
                ConstStridedMap<T> hp(out_.data() + tp * h, eb, eh, h_stride);
                wh_.grad.matrix().noalias() += hp.transpose() * da;
                dh_next.noalias() = da * wh_.value.matrix().transpose();
            }
        }
        const auto dgm = dgates.matrix();
        wx_.grad.matrix().noalias() += x_.matrix().transpose() * dgm;
        b_.grad.matrix().row(0) += dgm.colwise().sum();
        Tensor<T> dx(x_.shape());
        dx.matrix().noalias() = dgm * wx_.value.matrix().transpose();
        return dx;
    }

    std::vector<Param<T>*> params() { return {&wx_, &wh_, &b_}; }

private:
    std::size_t in_ = 0, h_ = 0;
    bool reverse_ = false;
    Param<T> wx_, wh_, b_;
    Tensor<T> x_, gates_, cell_, tanh_cell_, out_;
};

/// Forward and reverse LSTMs of width m/2 each; outputs concatenated per time step.
template <typename T>
class BiLstm {
public:
    BiLstm() = default;
    BiLstm(const std::string& name, const std::string& group, std::size_t in, std::size_t width, Rng& rng) {
        if (width % 2 != 0) throw ShapeError("bilstm width must be even");
        fwd_ = Lstm<T>(name + ".forward", group, in, width / 2, false, rng);
        bwd_ = Lstm<T>(name + ".backward", group, in, width / 2, true, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const auto hf = fwd_.forward(x);
        const auto hb = bwd_.forward(x);
        const std::size_t b = x.dim(0), t = x.dim(1), h = fwd_.hidden();
        Tensor<T> out({b, t, 2 * h});
        for (std::size_t r = 0; r < b * t; ++r) {
            std::copy_n(hf.data() + r * h, h, out.data() + r * 2 * h);
            std::copy_n(hb.data() + r * h, h, out.data() + r * 2 * h + h);
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dout) {
        const std::size_t b = dout.dim(0), t = dout.dim(1), h = fwd_.hidden();
        Tensor<T> df({b, t, h}), db({b, t, h});
        for (std::size_t r = 0; r < b * t; ++r) {
            std::copy_n(dout.data() + r * 2 * h, h, df.data() + r * h);
            std::copy_n(dout.data() + r * 2 * h + h, h, db.data() + r * h);
        }
        auto dx = fwd_.backward(df);
        const auto dx2 = bwd_.backward(db);
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx2[i];
        return dx;
    }

    std::vector<Param<T>*> params() {
        auto p = fwd_.params();
        for (auto* q : bwd_.params()) p.push_back(q);
        return p;
    }

private:
    Lstm<T> fwd_, bwd_;
};

/// Multi-head self-attention MHA(S, S, S) on B x T x m. Returns the output projection A;
/// the caller forms any residual.
template <typename T>
class MultiHeadSelfAttention {
public:
    MultiHeadSelfAttention() = default;
    MultiHeadSelfAttention(const std::string& name, const std::string& group, std::size_t width, std::size_t heads, Rng& rng)
        : m_(width), heads_(heads) {
        if (heads == 0 || width % heads != 0)
            throw ShapeError("attention width " + std::to_string(width) + " not divisible by " + std::to_string(heads) + " heads");
        for (const char* p : {"query", "key", "value", "output"}) {
            w_.emplace_back(name + "." + p + ".kernel", group, std::vector<std::size_t>{width, width});
            b_.emplace_back(name + "." + p + ".bias", group, std::vector<std::size_t>{width});
            glorot_uniform(w_.back().value, width, width, rng);
        }
    }

    Tensor<T> forward(const Tensor<T>& s) {
        require_shape(s, 3, "attention");
        if (s.dim(2) != m_) throw ShapeError("attention: expected width " + std::to_string(m_) + ", got " + shape_str(s.shape()));
        s_ = s;
        const std::size_t b = s.dim(0), t = s.dim(1), dh = m_ / heads_;
        const auto et = static_cast<Eigen::Index>(t);
        const auto edh = static_cast<Eigen::Index>(dh);
        const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(m_));
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));
        for (std::size_t p = 0; p < 3; ++p) {
            proj_[p] = Tensor<T>(s.shape());
            proj_[p].matrix().noalias() = s.matrix() * w_[p].value.matrix();
            proj_[p].matrix().rowwise() += b_[p].value.matrix().row(0);
        }
        probs_ = Tensor<T>({b * heads_, t, t});
        ctx_ = Tensor<T>(s.shape());
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t hi = 0; hi < heads_; ++hi) {
                const std::size_t off = bi * t * m_ + hi * dh;
                ConstStridedMap<T> q(proj_[0].data() + off, et, edh, stride);
                ConstStridedMap<T> k(proj_[1].data() + off, et, edh, stride);
                ConstStridedMap<T> v(proj_[2].data() + off, et, edh, stride);
                MatMap<T> p(probs_.data() + (bi * heads_ + hi) * t * t, et, et);
                p.noalias() = (q * k.transpose()) * scale;
                for (Eigen::Index r = 0; r < et; ++r) {
                    const T mx = p.row(r).maxCoeff();
                    p.row(r) = (p.row(r).array() - mx).exp();
                    p.row(r) /= p.row(r).sum();
                }
                StridedMap<T> c(ctx_.data() + off, et, edh, stride);
                c.noalias() = p * v;
            }
        Tensor<T> a(s.shape());
        a.matrix().noalias() = ctx_.matrix() * w_[3].value.matrix();
        a.matrix().rowwise() += b_[3].value.matrix().row(0);
        return a;
    }

    Tensor<T> backward(const Tensor<T>& da) {
        if (da.shape() != s_.shape()) throw ShapeError("attention backward: gradient shape mismatch");
        const std::size_t b = s_.dim(0), t = s_.dim(1), dh = m_ / heads_;
        const auto et = static_cast<Eigen::Index>(t);
        const auto edh = static_cast<Eigen::Index>(dh);
        const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(m_));
        const T scale = T(1) / std::sqrt(static_cast<T>(dh));

        w_[3].grad.matrix().noalias() += ctx_.matrix().transpose() * da.matrix();
        b_[3].grad.matrix().row(0) += da.matrix().colwise().sum();
        Tensor<T> dctx(s_.shape());
        dctx.matrix().noalias() = da.matrix() * w_[3].value.matrix().transpose();

        std::array<Tensor<T>, 3> dproj{Tensor<T>(s_.shape()), Tensor<T>(s_.shape()), Tensor<T>(s_.shape())};
        Mat<T> dp(et, et);
        for (std::size_t bi = 0; bi < b; ++bi)
            for (std::size_t hi = 0; hi < heads_; ++hi) {
                const std::size_t off = bi * t * m_ + hi * dh;
                ConstStridedMap<T> q(proj_[0].data() + off, et, edh, stride);
                ConstStridedMap<T> k(proj_[1].data() + off, et, edh, stride);
                ConstStridedMap<T> v(proj_[2].data() + off, et, edh, stride);
                ConstStridedMap<T> dc(dctx.data() + off, et, edh, stride);
                ConstMatMap<T> p(probs_.data() + (bi * heads_ + hi) * t * t, et, et);
                StridedMap<T> dq(dproj[0].data() + off, et, edh, stride);
                StridedMap<T> dk(dproj[1].data() + off, et, edh, stride);
                StridedMap<T> dv(dproj[2].data() + off, et, edh, stride);
                dv.noalias() = p.transpose() * dc;
                dp.noalias() = dc * v.transpose();
                for (Eigen::Index r = 0; r < et; ++r) {
                    const T dot = dp.row(r).dot(p.row(r));
                    dp.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
                }
                dq.noalias() = (dp * k) * scale;
                dk.noalias() = (dp.transpose() * q) * scale;
            }
        Tensor<T> ds(s_.shape());
        for (std::size_t p = 0; p < 3; ++p) {
            w_[p].grad.matrix().noalias() += s_.matrix().transpose() * dproj[p].matrix();
            b_[p].grad.matrix().row(0) += dproj[p].matrix().colwise().sum();
            ds.matrix().noalias() += dproj[p].matrix() * w_[p].value.matrix().transpose();
        }
        return ds;
    }

    /// Attention weights of the last forward pass, (B*heads) x T x T.
    const Tensor<T>& attention_weights() const { return probs_; }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> p;
        for (std::size_t i = 0; i < 4; ++i) {
            p.push_back(&w_[i]);
            p.push_back(&b_[i]);
        }
        return p;
    }

private:
    std::size_t m_ = 0, heads_ = 1;
    std::vector<Param<T>> w_, b_;
    Tensor<T> s_, ctx_, probs_;
    std::array<Tensor<T>, 3> proj_;
};

/// Inverted dropout: kept units are scaled by 1/(1-rate) so the expectation is unchanged.
template <typename T>
class Dropout {
public:
    explicit Dropout(double rate = 0.0) : rate_(rate) {
        if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
    }

    double rate() const { return rate_; }

    Tensor<T> forward(const Tensor<T>& x, bool training, Rng& rng) {
        active_ = training && rate_ > 0.0;
        if (!active_) return x;
        mask_ = Tensor<T>(x.shape());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const T keep_scale = static_cast<T>(1.0 / (1.0 - rate_));
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            mask_[i] = u(rng) >= rate_ ? keep_scale : T(0);
            y[i] = x[i] * mask_[i];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        if (!active_) return dy;
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * mask_[i];
        return dx;
    }

    const Tensor<T>& mask() const { return mask_; }

private:
    double rate_ = 0.0;
    bool active_ = false;
    Tensor<T> mask_;
};

/// Row lookup into an S x d_e matrix.
template <typename T>
class Embedding {
public:
    Embedding() = default;
    Embedding(const std::string& name, const std::string& group, std::size_t rows, std::size_t dim, Rng& rng)
        : e_(name + ".embeddings", group, {rows, dim}) {
        std::uniform_real_distribution<double> u(-0.05, 0.05);
        for (auto& v : e_.value.values()) v = static_cast<T>(u(rng));
    }

    std::size_t rows() const { return e_.value.dim(0); }
    std::size_t dim() const { return e_.value.dim(1); }

    Tensor<T> forward(const std::vector<std::size_t>& ids) {
        ids_ = ids;
        Tensor<T> out({ids.size(), dim()});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] >= rows()) throw InvalidArgument("unknown state index " + std::to_string(ids[i]));
            std::copy_n(e_.value.data() + ids[i] * dim(), dim(), out.data() + i * dim());
        }
        return out;
    }

    void backward(const Tensor<T>& dout) {
        for (std::size_t i = 0; i < ids_.size(); ++i)
            for (std::size_t j = 0; j < dim(); ++j) e_.grad[ids_[i] * dim() + j] += dout[i * dim() + j];
    }

    /// Appends a row equal to the mean of the existing rows and returns its index.
    std::size_t add_mean_row() {
        const std::size_t r = rows(), d = dim();
        Tensor<T> grown({r + 1, d});
        std::copy(e_.value.values().begin(), e_.value.values().end(), grown.data());
        for (std::size_t j = 0; j < d; ++j) {
            T s = T(0);
            for (std::size_t i = 0; i < r; ++i) s += e_.value[i * d + j];
            grown[r * d + j] = r > 0 ? s / static_cast<T>(r) : T(0);
        }
        e_.value = std::move(grown);
        e_.grad = Tensor<T>({r + 1, d});
        return r;
    }

    Param<T>& table() { return e_; }
    const Param<T>& table() const { return e_; }
    std::vector<Param<T>*> params() { return {&e_}; }

private:
    Param<T> e_;
    std::vector<std::size_t> ids_;
};

}  // namespace climcast::nn
