// SPDX-License-Identifier: Apache-2.0
//
// climcast: command-line front end. Exit codes: 0 ok, 2 usage/data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "climcast/config.hpp"
#include "climcast/data_model.hpp"
#include "climcast/forecast.hpp"
#include "climcast/metrics.hpp"
#include "climcast/multistate.hpp"

namespace fs = std::filesystem;
using namespace climcast;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 7;
    bool seed_given = false;
};

RunConfig resolve(const Common& c) {
    RunConfig rc;
    if (!c.config_path.empty()) rc = load_run_config(c.config_path);
    if (c.seed_given) rc.seed = c.seed;
    rc.apply_seed();
    return rc;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void echo_config(const fs::path& dir, const RunConfig& rc) { write_json(dir / "config.resolved.json", to_flat_json(rc)); }

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) out.push_back(item);
    return out;
}

nlohmann::json metrics_json(const std::vector<MetricReport>& reports) {
    nlohmann::json states = nlohmann::json::object();
    for (const auto& r : reports) states[r.state_id] = r;
    return {{"states", states}};
}

void write_forecasts(const fs::path& path, const std::vector<ForecastResult>& results, bool with_observed) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    write_forecast_csv(out, results, with_observed);
}

/// Replaces incidence at indices >= from with a sentinel, on a copy.
WeeklyPanel poisoned(WeeklyPanel p, std::size_t from) {
    for (std::size_t t = from; t < p.size(); ++t) p.records[t].incidence = 1e9;
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"climcast: climate-driven weekly incidence forecasting"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON config with flat dotted keys")->check(CLI::ExistingFile);
        sub->add_option("--out-dir", common.out_dir, "output directory");
        sub->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { common.seed = s, common.seed_given = true; }, "master seed");
    };

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic weekly panel CSV");
    int n_states = 1, n_weeks = 312, lag_weeks = 3;
    double noise = 0.0, amplitude = 200.0;
    std::string synth_out;
    synth->add_option("--states", n_states, "number of states")->check(CLI::PositiveNumber);
    synth->add_option("--weeks", n_weeks, "weeks per state");
    synth->add_option("--noise", noise, "incidence noise level");
    synth->add_option("--amplitude", amplitude, "epidemic amplitude (single state)");
    synth->add_option("--lag", lag_weeks, "climate-to-incidence lag in weeks");
    synth->add_option("--out", synth_out, "output CSV")->required();
    add_common(synth);

    // Shared data/checkpoint options.
    std::string data, state, checkpoint, out_file, mode = "actual", states_list;
    std::size_t horizon = 0, mc_passes = 0, train_weeks = 0;
    long start = -1, end = -1;
    bool emit_observed = false, poison = false, mc_given = false;

    auto* train = app.add_subcommand("train", "fit Stage-1 and Stage-2 on one state");
    train->add_option("--data", data, "panel CSV")->required();
    train->add_option("--state", state, "state id")->required();
    add_common(train);

    auto* onestep = app.add_subcommand("onestep", "one-week-ahead forecasts over a target range");
    onestep->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    onestep->add_option("--data", data, "panel CSV")->required();
    onestep->add_option("--state", state, "state id")->required();
    onestep->add_option("--mode", mode, "lag source: actual|synthetic")->check(CLI::IsMember({"actual", "synthetic"}));
    onestep->add_option("--start", start, "first target index (default: test start)");
    onestep->add_option("--end", end, "one past the last target index (default: panel end)");
    onestep->add_option("--out", out_file, "forecast CSV (default: <out-dir>/onestep.csv)");
    onestep->add_flag("--emit-observed", emit_observed, "append the observed column");
    onestep->add_flag("--poison-labels", poison, "debug: overwrite post-window incidence with 1e9 before forecasting");
    add_common(onestep);

    auto* rollout = app.add_subcommand("rollout", "label-free multi-week forecast with MC-dropout intervals");
    rollout->add_option("--checkpoint", checkpoint, "checkpoint directory")->required();
    rollout->add_option("--data", data, "panel CSV")->required();
    rollout->add_option("--state", state, "state id")->required();
    rollout->add_option("--horizon", horizon, "weeks to forecast (default from config)");
    rollout->add_option("--start", start, "first forecast index (default: test start)");
    rollout->add_option_function<std::size_t>(
        "--mc-passes", [&](std::size_t n) { mc_passes = n, mc_given = true; }, "stochastic passes; 0 = deterministic");
    rollout->add_option("--out", out_file, "forecast CSV (default: <out-dir>/forecast.csv)");
    rollout->add_flag("--emit-observed", emit_observed, "append the observed column");
    rollout->add_flag("--poison-labels", poison, "debug: overwrite post-window incidence with 1e9 before forecasting");
    add_common(rollout);

    auto* pretrain = app.add_subcommand("pretrain", "joint multi-state pretraining with state embeddings");
    pretrain->add_option("--data", data, "panel CSV")->required();
    pretrain->add_option("--states", states_list, "comma-separated state ids (default: all)");
    add_common(pretrain);

    auto* finetune_cmd = app.add_subcommand("finetune", "adapt a pretrained checkpoint to one state");
    finetune_cmd->add_option("--checkpoint", checkpoint, "pretrained checkpoint directory")->required();
    finetune_cmd->add_option("--data", data, "panel CSV")->required();
    finetune_cmd->add_option("--state", state, "target state id")->required();
    finetune_cmd->add_option("--train-weeks", train_weeks, "explicit training length (default: train fraction)");
    add_common(finetune_cmd);

    auto* evaluate = app.add_subcommand("evaluate", "metrics from forecast CSVs carrying an observed column");
    std::vector<std::string> forecast_files;
    evaluate->add_option("--forecast", forecast_files, "forecast CSV(s)")->required();
    evaluate->add_option("--out", out_file, "metric JSON (default: <out-dir>/metrics.json)");
    add_common(evaluate);

    auto* compare = app.add_subcommand("compare", "paired bootstrap comparison of two per-state metric files");
    std::string file_a, file_b, metric = "mare";
    std::size_t iterations = 0;
    compare->add_option("--a", file_a, "metric JSON of model A")->required()->check(CLI::ExistingFile);
    compare->add_option("--b", file_b, "metric JSON of model B")->required()->check(CLI::ExistingFile);
    compare->add_option("--metric", metric, "mare|r2|mse")->check(CLI::IsMember({"mare", "r2", "mse"}));
    compare->add_option("--iterations", iterations, "bootstrap draws (default from config)");
    add_common(compare);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        const RunConfig rc = resolve(common);
        const fs::path out_dir = common.out_dir;

        if (synth->parsed()) {
            SyntheticScenario sc = n_states > 1 ? SyntheticScenario::family(n_states, rc.seed, noise) : SyntheticScenario{};
            sc.n_weeks = n_weeks;
            sc.noise = noise;
            sc.lag_weeks = lag_weeks;
            sc.seed = rc.seed;
            if (n_states == 1) sc.amplitude = {amplitude};
            write_panels(synth_out, generate_synthetic(sc));
            std::cout << "wrote " << n_states << " state(s) x " << n_weeks << " weeks to " << synth_out << '\n';
            return 0;
        }

        if (train->parsed()) {
            const auto panel = load_panel(data, state);
            auto tp = train_pipeline<double>(panel, rc.pipeline);
            const auto hash = save_models(tp.models, out_dir);
            RolloutPlan plan{tp.report.split.test_begin(), tp.report.split.test_size()};
            const auto fc = recursive_rollout(tp.models, panel, plan);
            const auto onestep_fc = one_step_series(tp.models, panel, plan.start, plan.start + plan.horizon, LagMode::Actual);
            nlohmann::json report = tp.report;
            report["checkpoint_hash"] = hash;
            report["state_id"] = state;
            write_json(out_dir / "train_report.json", report);
            write_json(out_dir / "metrics.json", metrics_json({evaluate_forecast(fc, panel)}));
            write_json(out_dir / "metrics_onestep.json", metrics_json({evaluate_forecast(onestep_fc, panel)}));
            echo_config(out_dir, rc);
            std::cout << "checkpoint " << hash << " written to " << out_dir.string() << '\n';
            return 0;
        }

        if (onestep->parsed() || rollout->parsed()) {
            auto models = load_models<double>(checkpoint);
            const auto panel = load_panel(data, state);
            const auto& entry = models.state(state);
            ForecastResult fc;
            if (rollout->parsed()) {
                RolloutPlan plan;
                plan.start = start >= 0 ? static_cast<std::size_t>(start) : entry.train_end;
                plan.horizon = horizon ? horizon : rc.horizon;
                const std::size_t passes = mc_given ? mc_passes : rc.mc_passes;
                const auto input = poison ? poisoned(panel, plan.start) : panel;
                fc = passes == 0 ? recursive_rollout(models, input, plan) : mc_dropout_forecast(models, input, plan, passes, rc.seed);
                if (out_file.empty()) out_file = (out_dir / "forecast.csv").string();
            } else {
                const std::size_t b = start >= 0 ? static_cast<std::size_t>(start) : entry.train_end;
                const std::size_t e = end >= 0 ? static_cast<std::size_t>(end) : panel.size();
                if (b == 0 || b >= e || e > panel.size()) throw InvalidArgument("invalid one-step target range");
                // The last window read by the range ends at e - 2; incidence from there on is never a lag.
                const auto input = poison ? poisoned(panel, mode == "actual" ? e - 2 : b) : panel;
                fc = one_step_series(models, input, b, e, parse_lag_mode(mode));
                if (out_file.empty()) out_file = (out_dir / "onestep.csv").string();
            }
            if (emit_observed) attach_observed(fc, panel);
            write_forecasts(out_file, {fc}, emit_observed);
            echo_config(fs::path(out_file).parent_path().empty() ? fs::path(".") : fs::path(out_file).parent_path(), rc);
            return 0;
        }

        if (pretrain->parsed()) {
            auto all = load_panels(data);
            std::vector<WeeklyPanel> panels;
            if (states_list.empty()) {
                for (auto& [id, p] : all) panels.push_back(std::move(p));
            } else {
                for (const auto& id : split_list(states_list)) {
                    auto it = all.find(id);
                    if (it == all.end()) throw InvalidArgument("state '" + id + "' not found in " + data);
                    panels.push_back(it->second);
                }
            }
            auto res = pretrain_multistate<double>(panels, rc.pipeline);
            res.models.freeze = rc.freeze;
            const auto hash = save_models(res.models, out_dir);
            write_json(out_dir / "pretrain_report.json", {{"checkpoint_hash", hash},
                                                          {"states", panels.size()},
                                                          {"embedding_rows", res.models.net.config().n_states},
                                                          {"stage1_pairs", res.stage1_pairs},
                                                          {"fit_windows", res.fit_windows},
                                                          {"holdout_windows", res.holdout_windows},
                                                          {"history", res.history}});
            echo_config(out_dir, rc);
            std::cout << "pretrained on " << panels.size() << " states, checkpoint " << hash << '\n';
            return 0;
        }

        if (finetune_cmd->parsed()) {
            const auto models = load_models<double>(checkpoint);
            const auto panel = load_panel(data, state);
            FinetuneOptions opt;
            opt.train_end = train_weeks;
            opt.train_frac = rc.pipeline.train_frac;
            opt.holdout_frac = rc.pipeline.holdout_frac;
            opt.plan = rc.freeze;
            opt.train = rc.pipeline.train;
            opt.train.max_epochs = rc.finetune_epochs;
            auto res = finetune(models, panel, opt);
            const auto hash = save_models(res.models, out_dir);
            write_json(out_dir / "finetune_report.json", {{"checkpoint_hash", hash},
                                                          {"state_id", state},
                                                          {"new_state", res.new_state},
                                                          {"embedding_row", res.embedding_row},
                                                          {"embedding_rows", res.models.net.config().n_states},
                                                          {"history", res.history}});
            echo_config(out_dir, rc);
            std::cout << "fine-tuned " << state << " (embedding rows " << res.models.net.config().n_states << "), checkpoint " << hash
                      << '\n';
            return 0;
        }

        if (evaluate->parsed()) {
            std::vector<MetricReport> reports;
            for (const auto& f : forecast_files) {
                for (auto& r : read_forecast_csv(f)) {
                    std::vector<double> y, yhat;
                    std::vector<EpiWeek> when;
                    for (const auto& p : r.points) {
                        if (!p.observed) throw InvalidArgument(f + ": forecast CSV lacks the observed column");
                        y.push_back(*p.observed);
                        yhat.push_back(p.mean);
                        when.push_back(p.when);
                    }
                    reports.push_back(metric_report(r.state_id, when, y, yhat));
                }
            }
            if (out_file.empty()) out_file = (out_dir / "metrics.json").string();
            write_json(out_file, metrics_json(reports));
            echo_config(fs::path(out_file).parent_path().empty() ? fs::path(".") : fs::path(out_file).parent_path(), rc);
            return 0;
        }

        if (compare->parsed()) {
            auto load = [](const std::string& path) {
                try {
                    return nlohmann::json::parse(nn::read_file(path)).at("states");
                } catch (const nlohmann::json::exception& e) {
                    throw ParseError(path + ": " + e.what());
                }
            };
            const auto ja = load(file_a), jb = load(file_b);
            std::vector<std::string> ids;
            for (const auto& [k, v] : ja.items()) ids.push_back(k);
            std::vector<std::string> ids_b;
            for (const auto& [k, v] : jb.items()) ids_b.push_back(k);
            if (ids != ids_b) throw InvalidArgument("metric files cover different state sets");
            std::vector<double> a, b;
            for (const auto& id : ids) {
                a.push_back(ja.at(id).at(metric).get<double>());
                b.push_back(jb.at(id).at(metric).get<double>());
            }
            const auto better = metric == "r2" ? Better::Higher : Better::Lower;
            const auto s = bootstrap_compare(a, b, iterations ? iterations : rc.bootstrap_iterations, rc.seed, better, metric);
            write_json(out_dir / "compare.json", s);
            echo_config(out_dir, rc);
            std::cout << std::setprecision(6) << "metric      " << metric << "\nstates      " << s.n_states << "\niterations  "
                      << s.n_iterations << "\ndelta mean  " << s.delta_mean << "  [" << s.delta_ci_lo << ", " << s.delta_ci_hi
                      << "]\nsigned log  " << s.signed_log_mean << "  [" << s.signed_log_ci_lo << ", " << s.signed_log_ci_hi
                      << "]\nP(A better) " << s.win_probability << '\n';
            return 0;
        }
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return 0;
}
