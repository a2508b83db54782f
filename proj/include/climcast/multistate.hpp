// SPDX-License-Identifier: Apache-2.0
//
// Multi-state pretraining with learned state embeddings, and fine-tuning onto a
// (possibly unseen) target state under a freeze plan.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "climcast/forecast.hpp"

namespace climcast {

/// Training range per state: explicit end when given, otherwise train_frac of the panel.
struct StateRange {
    std::string state_id;
    std::size_t train_end = 0;
};

template <typename T>
struct PretrainResult {
    ForecastModels<T> models;
    TrainHistory history;
    std::size_t stage1_pairs = 0;
    std::size_t fit_windows = 0;
    std::size_t holdout_windows = 0;
};

/// Jointly fits a pooled Stage-1 model and one network with an embedding row per state.
/// Each state keeps its own scalers fitted on its own training rows.
template <typename T = double>
PretrainResult<T> pretrain_multistate(const std::vector<WeeklyPanel>& panels, const PipelineConfig& cfg,
                                      const std::map<std::string, std::size_t>& train_ends = {}) {
    if (panels.empty()) throw InvalidArgument("pretraining needs at least one state");
    const auto schema = cfg.schema();
    PretrainResult<T> out;
    auto& m = out.models;
    m.schema = schema;

    Stage1Pairs pooled;
    WindowSet<T> fit, val;
    std::vector<RowMatrix> covs;
    for (std::size_t s = 0; s < panels.size(); ++s) {
        const auto& p = panels[s];
        if (m.states.count(p.state_id)) throw InvalidArgument("duplicate state id '" + p.state_id + "'");
        auto it = train_ends.find(p.state_id);
        const auto split = it != train_ends.end() ? explicit_split(p.size(), it->second, cfg.holdout_frac)
                                                  : temporal_split(p, cfg.train_frac, cfg.holdout_frac);
        const auto fp = FeaturePipeline::fit(schema, p, split.train_end);
        m.states[p.state_id] = {fp, s, split.train_end};
        const RowMatrix cov = fp.covariates_scaled(p);
        const auto y = detail::scaled_prefix(fp, p, split.train_end);
        detail::append_pairs(pooled, stage1_pairs(cov, y, schema, 0, split.train_end));
        const auto w = training_windows<T>(cov, y, schema, 0, split.train_end, s, p.state_id);
        if (w.size() == 0) throw InvalidArgument("state '" + p.state_id + "' yields no training windows");
        auto [f, v] = split_by_target(w, split.early_stop_begin);
        fit.append(f);
        val.append(v);
    }
    if (pooled.targets.size() < 2) throw InvalidArgument("pooled training range yields fewer than 2 Stage-1 pairs");
    m.stage1 = detail::fit_stage1(pooled, cfg.gbt, schema);
    out.stage1_pairs = pooled.targets.size();
    out.fit_windows = fit.size();
    out.holdout_windows = val.size();

    m.net = HybridNet<T>(cfg.net_for(schema, panels.size()));
    out.history = fit_network(m.net, fit, val, cfg.train);
    return out;
}

struct FinetuneOptions {
    std::size_t train_end = 0;  // 0 = use train_frac
    double train_frac = 0.7;
    double holdout_frac = 0.2;
    FreezePlan plan;
    TrainConfig train;  // learning_rate is taken from the plan
};

template <typename T>
struct FinetuneResult {
    ForecastModels<T> models;
    TrainHistory history;
    std::size_t embedding_row = 0;
    bool new_state = false;
};

/// Adapts a pretrained model to `target`. An unseen state gets a new embedding row
/// initialized to the mean of existing rows. Frozen groups stay bit-identical. The
/// pooled Stage-1 model is reused as-is.
template <typename T>
FinetuneResult<T> finetune(const ForecastModels<T>& pretrained, const WeeklyPanel& target, const FinetuneOptions& opt) {
    if (!pretrained.net.config().uses_embedding()) throw InvalidArgument("fine-tuning needs a model with state embeddings");
    if (opt.plan.frozen.count("embedding")) throw InvalidArgument("the state embedding must stay trainable during fine-tuning");
    FinetuneResult<T> out;
    out.models = pretrained;
    auto& m = out.models;
    const auto split = opt.train_end ? explicit_split(target.size(), opt.train_end, opt.holdout_frac)
                                     : temporal_split(target, opt.train_frac, opt.holdout_frac);
    const auto fp = FeaturePipeline::fit(m.schema, target, split.train_end);
    auto it = m.states.find(target.state_id);
    if (it == m.states.end()) {
        out.embedding_row = m.net.add_state();
        out.new_state = true;
    } else {
        out.embedding_row = it->second.embedding_row;
    }
    m.states[target.state_id] = {fp, out.embedding_row, split.train_end};

    m.net.apply_freeze_plan(opt.plan);
    m.freeze = opt.plan;
    const RowMatrix cov = fp.covariates_scaled(target);
    const auto y = detail::scaled_prefix(fp, target, split.train_end);
    const auto w = training_windows<T>(cov, y, m.schema, 0, split.train_end, out.embedding_row, target.state_id);
    if (w.size() == 0) throw InvalidArgument("target state yields no training windows");
    auto [fit, val] = split_by_target(w, split.early_stop_begin);
    if (fit.size() == 0) {
        fit = w;
        val = WindowSet<T>{};
    }
    TrainConfig tc = opt.train;
    tc.learning_rate = opt.plan.learning_rate;
    out.history = fit_network(m.net, fit, val, tc);
    m.net.unfreeze_all();
    return out;
}

}  // namespace climcast
