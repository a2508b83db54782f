// SPDX-License-Identifier: Apache-2.0
//
// Stage-1 regressor: squared-loss gradient boosting with exact greedy splits,
// and the closed-form ridge baseline.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <json.hpp>

#include "climcast/errors.hpp"
#include "climcast/features.hpp"

namespace climcast {

struct GbtParams {
    int rounds = 200;
    int max_depth = 4;
    double learning_rate = 0.1;
    double lambda = 1.0;  // L2 penalty on leaf weights
    double gamma = 0.0;   // minimum gain to split
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GbtParams, rounds, max_depth, learning_rate, lambda, gamma)

/// Flat binary tree. A node with feature < 0 is a leaf.
struct RegressionTree {
    struct Node {
        int feature = -1;
        double threshold = 0.0;  // x[feature] < threshold goes left
        int left = -1;
        int right = -1;
        double weight = 0.0;
    };
    std::vector<Node> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const auto& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)].weight;
    }

    int depth() const { return depth_from(0); }

private:
    int depth_from(int i) const {
        const auto& n = nodes[static_cast<std::size_t>(i)];
        if (n.feature < 0) return 0;
        return 1 + std::max(depth_from(n.left), depth_from(n.right));
    }
};

struct GbtModel {
    GbtParams params;
    double base_score = 0.0;
    std::size_t n_features = 0;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // after each round; entry 0 is the base-score loss
    std::string schema_hash;

    double predict(std::span<const double> z) const {
        if (z.size() != n_features)
            throw ShapeError("Stage-1 input has " + std::to_string(z.size()) + " features, model expects " +
                             std::to_string(n_features));
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(z);
        return base_score + params.learning_rate * s;
    }
};

inline void to_json(nlohmann::json& j, const RegressionTree& t) {
    j = nlohmann::json::array();
    for (const auto& n : t.nodes) j.push_back({n.feature, n.threshold, n.left, n.right, n.weight});
}
inline void from_json(const nlohmann::json& j, RegressionTree& t) {
    t.nodes.clear();
    for (const auto& e : j)
        t.nodes.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<int>(), e.at(3).get<int>(), e.at(4).get<double>()});
}
inline void to_json(nlohmann::json& j, const GbtModel& m) {
    j = {{"params", m.params}, {"base_score", m.base_score}, {"n_features", m.n_features},
         {"trees", m.trees},   {"train_mse", m.train_mse},   {"schema_hash", m.schema_hash}};
}
inline void from_json(const nlohmann::json& j, GbtModel& m) {
    m.params = j.at("params").get<GbtParams>();
    m.base_score = j.at("base_score").get<double>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.trees = j.at("trees").get<std::vector<RegressionTree>>();
    m.train_mse = j.at("train_mse").get<std::vector<double>>();
    m.schema_hash = j.value("schema_hash", "");
    for (const auto& t : m.trees)
        for (const auto& n : t.nodes)
            if (n.feature >= static_cast<int>(m.n_features)) throw ParseError("tree references feature beyond model width");
}

namespace detail {

/// Split score G^2 / (H + lambda).
inline double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

/// Gains closer than this (relative to the parent score) count as ties, so the
/// lowest feature / lowest threshold wins regardless of summation order.
inline double tie_tolerance(double parent_score) { return 1e-10 * std::max(1.0, std::abs(parent_score)); }

/// Midpoint between two distinct sorted values that still separates them under `x < thr`.
inline double split_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid > lo ? mid : hi;
}

class TreeGrower {
public:
    TreeGrower(const RowMatrix& x, std::span<const double> grad, const GbtParams& params,
               const std::vector<std::vector<std::size_t>>& sorted)
        : x_(x), grad_(grad), params_(params), sorted_(sorted), node_of_(static_cast<std::size_t>(x.rows()), 0) {}

    RegressionTree grow() {
        tree_.nodes.clear();
        std::vector<std::size_t> all(static_cast<std::size_t>(x_.rows()));
        std::iota(all.begin(), all.end(), 0);
        build(all, 0);
        return tree_;
    }

private:
    int build(const std::vector<std::size_t>& members, int depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        double g = 0.0;
        for (auto i : members) g += grad_[i];
        const double h = static_cast<double>(members.size());
        const double lambda = params_.lambda;
        tree_.nodes[static_cast<std::size_t>(id)].weight = -g / (h + lambda);
        if (depth >= params_.max_depth || members.size() < 2) return id;

        const double parent = leaf_score(g, h, lambda);
        const double tol = tie_tolerance(parent);
        for (auto i : members) node_of_[i] = id;

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = -std::numeric_limits<double>::infinity();
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            double gl = 0.0;
            double hl = 0.0;
            bool have_prev = false;
            std::size_t prev = 0;
            for (auto i : sorted_[static_cast<std::size_t>(f)]) {
                if (node_of_[i] != id) continue;
                if (have_prev) {
                    const double a = x_(static_cast<Eigen::Index>(prev), f);
                    const double b = x_(static_cast<Eigen::Index>(i), f);
                    if (a < b) {
                        const double gain = leaf_score(gl, hl, lambda) + leaf_score(g - gl, h - hl, lambda) - parent;
                        if (gain > best_gain + tol) {
                            best_gain = gain;
                            best_feature = static_cast<int>(f);
                            best_threshold = split_threshold(a, b);
                        }
                    }
                }
                gl += grad_[i];
                hl += 1.0;
                prev = i;
                have_prev = true;
            }
        }
        if (best_feature < 0 || !(best_gain > params_.gamma + tol)) return id;

        std::vector<std::size_t> left, right;
        for (auto i : members)
            (x_(static_cast<Eigen::Index>(i), best_feature) < best_threshold ? left : right).push_back(i);
        const int l = build(left, depth + 1);
        const int r = build(right, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }

    const RowMatrix& x_;
    std::span<const double> grad_;
    const GbtParams& params_;
    const std::vector<std::vector<std::size_t>>& sorted_;
    std::vector<int> node_of_;
    RegressionTree tree_;
};

}  // namespace detail

/// Fits y ~ f(x) by squared-loss boosting. Rows of `x` are Stage-1 contexts.
inline GbtModel fit_gbt(const RowMatrix& x, std::span<const double> y, const GbtParams& params = {}) {
    const auto n = static_cast<std::size_t>(x.rows());
    if (n == 0) throw InvalidArgument("fit_gbt: empty training set");
    if (n < 2) throw InvalidArgument("fit_gbt: need at least 2 training pairs");
    if (y.size() != n) throw ShapeError("fit_gbt: target length does not match rows");
    if (params.rounds < 0 || params.max_depth < 0 || params.learning_rate <= 0.0 || params.lambda < 0.0 || params.gamma < 0.0)
        throw InvalidArgument("fit_gbt: invalid hyperparameters");
    if (!x.allFinite()) throw NumericError("fit_gbt: non-finite feature value");

    GbtModel model;
    model.params = params;
    model.n_features = static_cast<std::size_t>(x.cols());
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);

    std::vector<std::vector<std::size_t>> sorted(model.n_features);
    for (std::size_t f = 0; f < model.n_features; ++f) {
        auto& order = sorted[f];
        order.resize(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return x(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(f)) <
                   x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(f));
        });
    }

    std::vector<double> pred(n, model.base_score);
    std::vector<double> grad(n);
    auto mse = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
        return s / static_cast<double>(n);
    };
    model.train_mse.push_back(mse());
    for (int round = 0; round < params.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) grad[i] = pred[i] - y[i];
        detail::TreeGrower grower(x, grad, params, sorted);
        auto tree = grower.grow();
        for (std::size_t i = 0; i < n; ++i) {
            std::span<const double> row(x.data() + i * model.n_features, model.n_features);
            pred[i] += params.learning_rate * tree.predict(row);
        }
        model.trees.push_back(std::move(tree));
        model.train_mse.push_back(mse());
    }
    return model;
}

inline double predict_gbt(const GbtModel& model, std::span<const double> z) { return model.predict(z); }

/// Stage-1 training pairs (Z_t, y_{t+1}) for target indices in [first_target, end_target).
struct Stage1Pairs {
    RowMatrix contexts;
    std::vector<double> targets;
    std::vector<std::size_t> target_index;
};

inline Stage1Pairs stage1_pairs(const RowMatrix& covariates, std::span<const double> target_series, const FeatureSchema& schema,
                                std::size_t begin_target, std::size_t end_target) {
    Stage1Pairs out;
    const std::size_t first = std::max(begin_target, first_context_index(schema) + 1);
    end_target = std::min(end_target, target_series.size());
    if (end_target <= first) return out;
    const std::size_t n = end_target - first;
    out.contexts.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(schema.stage1_dim()));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t target = first + k;
        const auto z = build_stage1_context(covariates, target - 1, schema);
        out.contexts.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
        out.targets.push_back(target_series[target]);
        out.target_index.push_back(target);
    }
    return out;
}

/// Stage-1 one-week-ahead predictions for every index s whose context Z_{s-1} exists;
/// NaN elsewhere. Only exogenous covariates are read.
inline std::vector<double> stage1_prediction_series(const GbtModel& model, const RowMatrix& covariates,
                                                    const FeatureSchema& schema) {
    const auto n = static_cast<std::size_t>(covariates.rows());
    std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = first_context_index(schema) + 1; s < n; ++s)
        out[s] = model.predict(build_stage1_context(covariates, s - 1, schema));
    return out;
}

/// Synthetic incidence lags: row k holds prediction[t_k - l] for each configured lag l.
struct LagTable {
    std::vector<std::size_t> indices;
    RowMatrix values;
};

inline LagTable synthesize_lags(const GbtModel& model, const RowMatrix& covariates, const FeatureSchema& schema,
                                std::span<const std::size_t> indices) {
    const auto preds = stage1_prediction_series(model, covariates, schema);
    LagTable table;
    table.indices.assign(indices.begin(), indices.end());
    table.values.resize(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(schema.incidence_lags.size()));
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const std::size_t t = indices[k];
        for (std::size_t j = 0; j < schema.incidence_lags.size(); ++j) {
            const auto l = static_cast<std::size_t>(schema.incidence_lags[j]);
            if (t < l || t - l >= preds.size() || std::isnan(preds[t - l]))
                throw InvalidArgument("no Stage-1 prediction covers lag " + std::to_string(l) + " at index " + std::to_string(t));
            table.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = preds[t - l];
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Ridge baseline

struct RidgeModel {
    std::vector<double> weights;
    double intercept = 0.0;
    double alpha = 0.0;

    double predict(std::span<const double> x) const {
        if (x.size() != weights.size()) throw ShapeError("ridge input dimension mismatch");
        double s = intercept;
        for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
        return s;
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RidgeModel, weights, intercept, alpha)

/// Solves (Xc'Xc + alpha I) w = Xc'yc on centered data; the intercept restores the means.
inline RidgeModel fit_ridge(const RowMatrix& x, std::span<const double> y, double alpha) {
    if (alpha < 0.0) throw InvalidArgument("ridge alpha must be >= 0");
    if (x.rows() == 0 || static_cast<std::size_t>(x.rows()) != y.size()) throw ShapeError("ridge: rows/targets mismatch");
    const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const double y_mean = yv.mean();
    const Eigen::MatrixXd xc = x.rowwise() - x_mean;
    const Eigen::VectorXd yc = yv.array() - y_mean;

    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += alpha;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const double scale = std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-12 * scale)
        throw NumericError("ridge normal equations are singular; use alpha > 0");
    const Eigen::VectorXd w = ldlt.solve(xc.transpose() * yc);

    RidgeModel m;
    m.alpha = alpha;
    m.weights.assign(w.data(), w.data() + w.size());
    m.intercept = y_mean - x_mean.dot(w);
    return m;
}

inline double predict_ridge(const RidgeModel& m, std::span<const double> x) { return m.predict(x); }

}  // namespace climcast
