// SPDX-License-Identifier: Apache-2.0
//
// Run configuration. Files are JSON objects with flat dotted keys
// ("train.max_epochs": 40); unknown keys and type mismatches are rejected.
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "climcast/errors.hpp"
#include "climcast/forecast.hpp"
#include "climcast/hybrid_net.hpp"

namespace climcast {

struct RunConfig {
    PipelineConfig pipeline;
    std::uint64_t seed = 7;
    std::size_t mc_passes = 50;
    std::size_t horizon = 52;
    FreezePlan freeze;
    int finetune_epochs = 30;
    std::size_t bootstrap_iterations = 10000;

    /// Propagates the master seed into network init and shuffling.
    void apply_seed() {
        pipeline.net.init_seed = seed;
        pipeline.train.seed = seed + 1;
    }
};

inline nlohmann::json to_nested_json(const RunConfig& c) {
    const auto& p = c.pipeline;
    nlohmann::json net = p.net;
    for (const char* k : {"input_dim", "seq_len", "n_states", "init_seed"}) net.erase(k);
    nlohmann::json train = p.train;
    train.erase("seed");
    return {{"seed", c.seed},
            {"features",
             {{"lookback", p.lookback},
              {"stage1_lookback", p.stage1_lookback},
              {"incidence_lags", p.incidence_lags},
              {"weather_lags", p.weather_lags}}},
            {"gbt", p.gbt},
            {"net", net},
            {"train", train},
            {"protocol",
             {{"train_frac", p.train_frac},
              {"holdout_frac", p.holdout_frac},
              {"cv_folds", p.cv_folds},
              {"cv_stage2_epochs", p.cv_stage2_epochs}}},
            {"forecast", {{"mc_passes", c.mc_passes}, {"horizon", c.horizon}}},
            {"finetune", {{"frozen", c.freeze.frozen}, {"learning_rate", c.freeze.learning_rate}, {"max_epochs", c.finetune_epochs}}},
            {"bootstrap", {{"iterations", c.bootstrap_iterations}}}};
}

inline RunConfig from_nested_json(const nlohmann::json& j) {
    RunConfig c;
    auto& p = c.pipeline;
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& f = j.at("features");
    p.lookback = f.at("lookback").get<int>();
    p.stage1_lookback = f.at("stage1_lookback").get<int>();
    p.incidence_lags = f.at("incidence_lags").get<std::vector<int>>();
    p.weather_lags = f.at("weather_lags").get<std::vector<int>>();
    p.gbt = j.at("gbt").get<GbtParams>();
    auto net = j.at("net");
    net["input_dim"] = p.net.input_dim;
    net["seq_len"] = p.net.seq_len;
    net["n_states"] = 0;
    net["init_seed"] = 0;
    p.net = net.get<NetConfig>();
    auto train = j.at("train");
    train["seed"] = 0;
    p.train = train.get<TrainConfig>();
    const auto& pr = j.at("protocol");
    p.train_frac = pr.at("train_frac").get<double>();
    p.holdout_frac = pr.at("holdout_frac").get<double>();
    p.cv_folds = pr.at("cv_folds").get<int>();
    p.cv_stage2_epochs = pr.at("cv_stage2_epochs").get<int>();
    c.mc_passes = j.at("forecast").at("mc_passes").get<std::size_t>();
    c.horizon = j.at("forecast").at("horizon").get<std::size_t>();
    c.freeze.frozen = j.at("finetune").at("frozen").get<std::set<std::string>>();
    c.freeze.learning_rate = j.at("finetune").at("learning_rate").get<double>();
    c.finetune_epochs = j.at("finetune").at("max_epochs").get<int>();
    c.bootstrap_iterations = j.at("bootstrap").at("iterations").get<std::size_t>();
    c.apply_seed();
    return c;
}

/// Nested objects become dotted keys; arrays and scalars are leaves.
inline nlohmann::json flatten_dotted(const nlohmann::json& j, const std::string& prefix = {}) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) out.update(flatten_dotted(v, key));
        else out[key] = v;
    }
    return out;
}

inline nlohmann::json unflatten_dotted(const nlohmann::json& flat) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : flat.items()) {
        nlohmann::json* node = &out;
        std::size_t pos = 0;
        for (std::size_t dot; (dot = k.find('.', pos)) != std::string::npos; pos = dot + 1) node = &(*node)[k.substr(pos, dot - pos)];
        (*node)[k.substr(pos)] = v;
    }
    return out;
}

inline nlohmann::json to_flat_json(const RunConfig& c) { return flatten_dotted(to_nested_json(c)); }

namespace detail {
inline bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
    if (a.is_number() && b.is_number()) return !(a.is_number_integer() || a.is_number_unsigned()) || b.is_number_integer() || b.is_number_unsigned();
    return a.type() == b.type();
}
}  // namespace detail

/// Applies flat dotted overrides on top of `base`.
inline RunConfig apply_overrides(const RunConfig& base, const nlohmann::json& overrides) {
    if (!overrides.is_object()) throw ParseError("config must be a JSON object of dotted keys");
    auto flat = to_flat_json(base);
    for (const auto& [k, v] : overrides.items()) {
        if (!flat.contains(k)) throw ParseError("unknown config key '" + k + "'");
        if (!detail::same_kind(flat[k], v)) throw ParseError("config key '" + k + "' has the wrong type");
        flat[k] = v;
    }
    try {
        return from_nested_json(unflatten_dotted(flat));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid config value: ") + e.what());
    }
}

inline RunConfig load_run_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(nn::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    RunConfig base;
    base.apply_seed();
    return apply_overrides(base, j);
}

}  // namespace climcast
