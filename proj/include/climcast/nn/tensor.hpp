// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "climcast/errors.hpp"

namespace climcast::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using StridedMap = Eigen::Map<Mat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const Mat<T>, Eigen::Unaligned, Eigen::OuterStride<>>;

using Rng = std::mt19937_64;

/// Dense row-major tensor of rank <= 3 (batch x time x channels).
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, T fill = T(0)) : shape_(std::move(shape)) {
        if (shape_.empty() || shape_.size() > 3) throw ShapeError("tensor rank must be 1..3");
        data_.assign(count(shape_), fill);
    }

    static std::size_t count(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return data_; }
    std::span<const T> span() const { return data_; }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    T& at(std::size_t b, std::size_t t, std::size_t c) { return data_[(b * shape_[1] + t) * shape_[2] + c]; }
    const T& at(std::size_t b, std::size_t t, std::size_t c) const { return data_[(b * shape_[1] + t) * shape_[2] + c]; }

    void reshape(std::vector<std::size_t> shape) {
        if (count(shape) != data_.size()) throw ShapeError("reshape changes element count");
        shape_ = std::move(shape);
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// View as a matrix whose columns are the last axis.
    MatMap<T> matrix() {
        const auto cols = static_cast<Eigen::Index>(shape_.back());
        return MatMap<T>(data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols);
    }
    ConstMatMap<T> matrix() const {
        const auto cols = static_cast<Eigen::Index>(shape_.back());
        return ConstMatMap<T>(data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols);
    }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

inline std::string shape_str(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
    return out + "]";
}

/// A trainable tensor with its gradient accumulator. `group` names the layer family
/// used by freeze plans.
template <typename T>
struct Param {
    std::string name;
    std::string group;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, std::string g, std::vector<std::size_t> shape)
        : name(std::move(n)), group(std::move(g)), value(shape), grad(shape) {}

    void zero_grad() { grad.fill(T(0)); }
};

/// Glorot-uniform initialization with the given fans.
template <typename T>
void glorot_uniform(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
}

template <typename T>
void require_shape(const Tensor<T>& t, std::size_t rank, const char* who) {
    if (t.rank() != rank) throw ShapeError(std::string(who) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(t.shape()));
}

}  // namespace climcast::nn
