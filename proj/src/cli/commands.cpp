#include "regimecast/cli/commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include <spdlog/spdlog.h>

#include "regimecast/cli/config.hpp"
#include "regimecast/cli/synthetic.hpp"
#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"
#include "regimecast/evaluation/backtest.hpp"

namespace regimecast {
namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> output_dir;
    std::optional<std::string> data;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "Run config JSON file")->required();
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--workers", o.workers, "Override the worker count (0 = all cores)");
    cmd->add_option("--output-dir", o.output_dir, "Override the output directory");
    cmd->add_option("--data", o.data, "Override the data CSV path");
}

RunConfig resolve(const Overrides& o) {
    auto config = load_run_config(o.config);
    if (o.seed) {
        config.seed = *o.seed;
    }
    if (o.workers) {
        config.workers = *o.workers;
    }
    if (o.output_dir) {
        config.output_dir = *o.output_dir;
    }
    if (o.data) {
        config.data.path = *o.data;
    }
    apply_seed_and_workers(config);
    config.validate();
    return config;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || ec) {
        throw IoError("cli", "cannot write " + path.string());
    }
    out << text;
}

std::filesystem::path model_dir(const RunConfig& config) { return config.output_dir / "model"; }

int cmd_train(const Overrides& o, std::ostream& out) {
    const auto config = resolve(o);
    const auto series = load_series(config);
    const auto model = train_ensemble(series, config.ensemble);
    save_model(model, model_dir(config));
    write_text(config.output_dir / "config.resolved.json", to_json(config).dump(2) + "\n");

    out << "trained on " << series.size() << " points, " << model.table_rows << " windows\n";
    out << "label histogram:\n";
    for (const auto& [id, count] : model.label_histogram) {
        out << "  " << id << ": " << count << "\n";
    }
    out << "discarded predictors: ";
    if (model.discarded.empty()) {
        out << "none";
    }
    for (std::size_t i = 0; i < model.discarded.size(); ++i) {
        out << (i ? ", " : "") << model.discarded[i];
    }
    out << "\nselected features: " << model.report.final_columns.size() << " of "
        << model.report.input_columns.size() << "\n";
    out << "top rules by support:\n" << explain_text(model.rules, 5, ExplainOrder::support);
    out << "model written to " << model_dir(config).string() << "\n";
    return 0;
}

int cmd_predict(const Overrides& o, const std::string& model_path, std::optional<std::size_t> horizon,
                const std::string& output, std::ostream& out) {
    const auto config = resolve(o);
    const auto model = load_model(model_path.empty() ? model_dir(config) : std::filesystem::path(model_path));
    const auto series = load_series(config);
    const auto forecast = predict_next(model, series, horizon.value_or(model.config.m));
    const auto text = forecast_csv(forecast, series.timestamps().back(), series.step());
    if (output.empty()) {
        out << text;
    } else {
        write_text(config.output_dir / output, text);
    }
    return 0;
}

int cmd_backtest(const Overrides& o, std::ostream& out) {
    const auto config = resolve(o);
    const auto series = load_series(config);
    const auto plan = plan_backtest(series.size(), config.backtest.train_fraction, config.backtest.step);
    Contenders contenders{config.ensemble, config.drift, config.ensemble.pool};
    const auto report = run_backtest(series, plan, contenders, config.workers);

    write_text(config.output_dir / "backtest_report.json", to_json(report).dump(2) + "\n");
    write_text(config.output_dir / "backtest_scores.csv", to_csv(report));
    csv::Record header{"fold", "start"};
    for (const auto& id : report.weight_ids) {
        header.push_back("weight_" + id);
    }
    std::string weights = csv::join(header) + "\n";
    for (std::size_t k = 0; k < report.ensemble_weights.size(); ++k) {
        csv::Record row{std::to_string(k), format_timestamp(report.fold_starts[k])};
        for (double w : report.ensemble_weights[k]) {
            row.push_back(csv::format_double(w));
        }
        weights += csv::join(row) + "\n";
    }
    write_text(config.output_dir / "backtest_weights.csv", weights);

    out << plan.folds.size() << " folds of " << plan.step << " points, first train size "
        << plan.folds.front().train_end << "\n";
    for (const auto& m : report.models) {
        out << "  " << m.name << ": mean MAPE " << csv::format_double(m.mean_mape);
        if (m.invalid_folds > 0) {
            out << " (" << m.invalid_folds << " invalid folds excluded)";
        }
        out << "\n";
    }
    out << "retrains: " << report.retrain_timestamps.size() << "\n";
    return 0;
}

int cmd_explain(const std::string& model_path, std::size_t top_k, const std::string& order, const std::string& format,
                std::ostream& out) {
    const auto model = load_model(model_path);
    const auto how = order == "coefficient" ? ExplainOrder::coefficient : ExplainOrder::support;
    if (format == "json") {
        out << explain_json(model.rules, top_k, how).dump(2) << "\n";
    } else {
        out << explain_text(model.rules, top_k, how);
    }
    return 0;
}

int cmd_simulate(const Overrides& o, std::ostream& out) {
    const auto config = resolve(o);
    const auto series = load_series(config);
    const auto start = static_cast<std::size_t>(
        std::floor(config.backtest.train_fraction * static_cast<double>(series.size())));
    if (start < config.ensemble.n + config.ensemble.m || start >= series.size()) {
        throw DataError("cli", "train_fraction leaves no room for a training or streaming region");
    }
    const auto initial = series.slice(0, start);
    OnlineEnsemble online(train_ensemble(initial, config.ensemble), initial, config.drift);

    std::vector<std::string> ids;
    for (const auto& spec : config.ensemble.pool) {
        ids.push_back(spec.id);
    }
    csv::Record header{"timestamp", "actual", "forecast", "retrain"};
    for (const auto& id : ids) {
        header.push_back("weight_" + id);
    }
    std::string rolling = csv::join(header) + "\n";
    std::string events;
    std::size_t drift_count = 0;

    CombinedForecast forecast = online.forecast(1);
    bool retrained = false;
    for (std::size_t i = start; i < series.size(); ++i) {
        csv::Record row{format_timestamp(series.timestamps()[i]), csv::format_double(series.target()[i]),
                        csv::format_double(forecast.values.front()), retrained ? "1" : "0"};
        for (const auto& id : ids) {
            const auto it = std::find(forecast.ids.begin(), forecast.ids.end(), id);
            row.push_back(it == forecast.ids.end()
                              ? "0"
                              : csv::format_double(forecast.weights[static_cast<std::size_t>(it - forecast.ids.begin())]));
        }
        rolling += csv::join(row) + "\n";

        auto result = online.step(series.slice(i, i + 1), 1);
        for (std::size_t d = 0; d < result.drifts.size(); ++d) {
            auto line = to_json(result.drifts[d], result.allowed[d]);
            line["event"] = "drift";
            events += line.dump() + "\n";
            ++drift_count;
        }
        retrained = result.retrain.has_value();
        if (result.retrain) {
            const auto& r = *result.retrain;
            nlohmann::json line = {{"event", "retrain"},
                                   {"timestamp", format_timestamp(r.timestamp)},
                                   {"statistic", r.statistic},
                                   {"rule_count", r.rule_count},
                                   {"succeeded", r.succeeded}};
            if (!r.succeeded) {
                line["message"] = r.message;
            }
            events += line.dump() + "\n";
        }
        forecast = std::move(result.forecast);
    }
    write_text(config.output_dir / "drift_events.jsonl", events);
    write_text(config.output_dir / "rolling_forecast.csv", rolling);
    out << "streamed " << series.size() - start << " points: " << drift_count << " drifts, "
        << online.retrains().size() << " retrains\n";
    return 0;
}

int cmd_generate(const std::string& output, std::uint64_t seed, std::size_t segments, std::size_t segment_length,
                 const std::string& truth, std::ostream& out) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.segments = segments;
    spec.segment_length = segment_length;
    const auto synthetic = generate_synthetic(spec);
    const ColumnSchema schema{"date", "value", {{"regime_hint", CovariateKind::categorical}}};
    write_text(output, to_csv(synthetic.series, schema));
    if (!truth.empty()) {
        std::string text = "date,regime\n";
        for (std::size_t i = 0; i < synthetic.regimes.size(); ++i) {
            text += format_timestamp(synthetic.series.timestamps()[i]) + "," +
                    std::string(to_string(synthetic.regimes[i])) + "\n";
        }
        write_text(truth, text);
    }
    out << "wrote " << synthetic.series.size() << " rows to " << output << "\n";
    return 0;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (const auto* error = dynamic_cast<const Error*>(&e)) {
        switch (error->kind()) {
            case ErrorKind::io:
            case ErrorKind::data:
                return 1;
            case ErrorKind::config:
                return 2;
            case ErrorKind::infeasible:
                return 3;
        }
    }
    return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Interpretable ensemble forecaster with drift-triggered retraining"};
    app.require_subcommand(1);
    app.footer(config_reference());
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();

    Overrides train_o, predict_o, backtest_o, simulate_o;
    auto* train = app.add_subcommand("train", "Build the training table, fit the rule model, write the model directory");
    add_config_options(train, train_o);

    auto* predict = app.add_subcommand("predict", "Forecast the steps after the end of the data file");
    add_config_options(predict, predict_o);
    std::string predict_model;
    std::optional<std::size_t> horizon;
    std::string predict_output;
    predict->add_option("--model", predict_model, "Model directory (default <output_dir>/model)");
    predict->add_option("--horizon", horizon, "Steps to forecast (default m)");
    predict->add_option("--output", predict_output, "CSV file name under the output directory (default stdout)");

    auto* backtest = app.add_subcommand("backtest", "Blocked cross-validation of the ensemble against each predictor");
    add_config_options(backtest, backtest_o);

    auto* explain = app.add_subcommand("explain", "List the rules of a trained model");
    std::string explain_model;
    std::size_t top_k = 5;
    std::string order = "support";
    std::string format = "text";
    explain->add_option("--model", explain_model, "Model directory")->required();
    explain->add_option("--top-k", top_k, "Number of rules")->capture_default_str();
    explain->add_option("--order", order, "support or coefficient")
        ->check(CLI::IsMember({"support", "coefficient"}))
        ->capture_default_str();
    explain->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}))->capture_default_str();

    auto* simulate = app.add_subcommand("simulate-stream",
                                        "Replay the evaluation region point by point with drift detection");
    add_config_options(simulate, simulate_o);

    auto* generate = app.add_subcommand("generate-synthetic", "Write the regime-switching benchmark CSV");
    std::string gen_output;
    std::uint64_t gen_seed = 7;
    std::size_t segments = 9;
    std::size_t segment_length = 100;
    std::string truth;
    generate->add_option("--output", gen_output, "CSV path")->required();
    generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
    generate->add_option("--segments", segments, "Number of segments")->capture_default_str();
    generate->add_option("--segment-length", segment_length, "Points per segment")->capture_default_str();
    generate->add_option("--truth", truth, "Optional CSV of the true regime per row");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    spdlog::set_level(spdlog::level::from_str(log_level));
    try {
        if (train->parsed()) {
            return cmd_train(train_o, out);
        }
        if (predict->parsed()) {
            return cmd_predict(predict_o, predict_model, horizon, predict_output, out);
        }
        if (backtest->parsed()) {
            return cmd_backtest(backtest_o, out);
        }
        if (explain->parsed()) {
            return cmd_explain(explain_model, top_k, order, format, out);
        }
        if (simulate->parsed()) {
            return cmd_simulate(simulate_o, out);
        }
        return cmd_generate(gen_output, gen_seed, segments, segment_length, truth, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace regimecast
