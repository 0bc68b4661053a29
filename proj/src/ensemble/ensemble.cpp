#include "regimecast/ensemble/ensemble.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

constexpr int kModelFormatVersion = 1;

nlohmann::json optional_json(const std::optional<std::size_t>& value) {
    return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

std::optional<std::size_t> optional_size(const nlohmann::json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    return j.get<std::size_t>();
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("ensemble", "cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("ensemble", "cannot read " + path.string());
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ensemble", path.string() + ": " + e.what());
    }
}

std::size_t index_in(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) {
        throw DataError("ensemble", "column '" + name + "' is not produced by the feature catalog");
    }
    return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::vector<double> restrict_top_k(std::span<const double> probabilities, std::optional<std::size_t> top_k) {
    std::vector<double> weights(probabilities.begin(), probabilities.end());
    if (!top_k || *top_k >= weights.size()) {
        return weights;
    }
    if (*top_k == 0) {
        throw ConfigError("ensemble", "top_k must be >= 1");
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return probabilities[a] > probabilities[b]; });
    double kept = 0.0;
    for (std::size_t r = 0; r < *top_k; ++r) {
        kept += probabilities[order[r]];
    }
    std::fill(weights.begin(), weights.end(), 0.0);
    for (std::size_t r = 0; r < *top_k; ++r) {
        const std::size_t i = order[r];
        weights[i] = kept > 0.0 ? probabilities[i] / kept : 1.0 / static_cast<double>(*top_k);
    }
    return weights;
}

CombinedForecast combine(std::span<const double> probabilities, const std::vector<std::string>& probability_ids,
                         const std::vector<Forecast>& forecasts, std::optional<std::size_t> top_k) {
    if (probabilities.size() != probability_ids.size() || forecasts.size() != probability_ids.size()) {
        throw DataError("ensemble", "probability and forecast counts differ");
    }
    if (forecasts.empty()) {
        throw DataError("ensemble", "nothing to combine");
    }
    CombinedForecast out;
    out.ids = probability_ids;
    out.weights = restrict_top_k(probabilities, top_k);
    const std::size_t horizon = forecasts.front().values.size();
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        if (forecasts[i].predictor_id != probability_ids[i]) {
            throw DataError("ensemble", "forecast id '" + forecasts[i].predictor_id +
                                            "' does not match probability id '" + probability_ids[i] + "'");
        }
        if (forecasts[i].values.size() != horizon) {
            throw DataError("ensemble", "forecasts have different horizons");
        }
        out.forecasts.push_back(forecasts[i].values);
    }
    out.values.assign(horizon, 0.0);
    for (std::size_t h = 0; h < horizon; ++h) {
        double total = 0.0;
        for (std::size_t i = 0; i < forecasts.size(); ++i) {
            total += out.weights[i] * out.forecasts[i][h];
        }
        out.values[h] = total;
    }
    return out;
}

void EnsembleConfig::validate() const {
    validate_pool(pool);
    if (n < 2) {
        throw ConfigError("ensemble", "window n must be >= 2");
    }
    if (m < 1) {
        throw ConfigError("ensemble", "horizon m must be >= 1");
    }
    if (stride < 1) {
        throw ConfigError("ensemble", "stride must be >= 1");
    }
    for (const auto& spec : pool) {
        if (spec.min_history() > n) {
            throw ConfigError("ensemble", "predictor '" + spec.id + "' needs " + std::to_string(spec.min_history()) +
                                              " points but n = " + std::to_string(n));
        }
    }
    if (top_k && *top_k < 1) {
        throw ConfigError("ensemble", "top_k must be >= 1");
    }
    if (table_length_cap && *table_length_cap < 10) {
        throw ConfigError("ensemble", "table_length_cap must be >= 10");
    }
    if (requested_splits && *requested_splits < 10) {
        throw ConfigError("ensemble", "requested_splits must be >= 10");
    }
    thresholds.validate();
    enet.validate();
    rulefit.validate();
}

nlohmann::json to_json(const EnsembleConfig& config) {
    auto pool = nlohmann::json::array();
    for (const auto& spec : config.pool) {
        pool.push_back(to_json(spec));
    }
    const auto& t = config.thresholds;
    const auto& r = config.rulefit;
    return {{"n", config.n},
            {"m", config.m},
            {"stride", config.stride},
            {"requested_splits", optional_json(config.requested_splits)},
            {"table_length_cap", optional_json(config.table_length_cap)},
            {"pool", pool},
            {"metric", std::string(to_string(config.metric))},
            {"top_k", optional_json(config.top_k)},
            {"thresholds",
             {{"null_fraction", t.null_fraction},
              {"similarity", t.similarity},
              {"correlation", t.correlation},
              {"value_tolerance", t.value_tolerance},
              {"variance_tolerance", t.variance_tolerance},
              {"similarity_min_r", t.similarity_min_r},
              {"selection_epsilon", t.selection_epsilon}}},
            {"enet",
             {{"alpha", config.enet.alpha},
              {"l1_ratio", config.enet.l1_ratio},
              {"max_iters", config.enet.max_iters},
              {"tol", config.enet.tol}}},
            {"rulefit",
             {{"n_trees", r.n_trees},
              {"max_depth", r.max_depth},
              {"learning_rate", r.learning_rate},
              {"subsample", r.subsample},
              {"min_samples_leaf", r.min_samples_leaf},
              {"l1_c", r.l1_c},
              {"include_linear_terms", r.include_linear_terms},
              {"seed", r.seed}}}};
}

EnsembleConfig ensemble_config_from_json(const nlohmann::json& j) {
    try {
        EnsembleConfig c;
        c.n = j.at("n").get<std::size_t>();
        c.m = j.at("m").get<std::size_t>();
        c.stride = j.at("stride").get<std::size_t>();
        c.requested_splits = optional_size(j.at("requested_splits"));
        c.table_length_cap = optional_size(j.at("table_length_cap"));
        for (const auto& spec : j.at("pool")) {
            c.pool.push_back(predictor_spec_from_json(spec));
        }
        const auto metric = metric_from_string(j.at("metric").get<std::string>());
        if (!metric) {
            throw DataError("ensemble", "unknown metric " + j.at("metric").dump());
        }
        c.metric = *metric;
        c.top_k = optional_size(j.at("top_k"));
        const auto& t = j.at("thresholds");
        c.thresholds.null_fraction = t.at("null_fraction").get<double>();
        c.thresholds.similarity = t.at("similarity").get<double>();
        c.thresholds.correlation = t.at("correlation").get<double>();
        c.thresholds.value_tolerance = t.at("value_tolerance").get<double>();
        c.thresholds.variance_tolerance = t.at("variance_tolerance").get<double>();
        c.thresholds.similarity_min_r = t.at("similarity_min_r").get<double>();
        c.thresholds.selection_epsilon = t.at("selection_epsilon").get<double>();
        const auto& e = j.at("enet");
        c.enet = {e.at("alpha").get<double>(), e.at("l1_ratio").get<double>(), e.at("max_iters").get<int>(),
                  e.at("tol").get<double>()};
        const auto& r = j.at("rulefit");
        c.rulefit.n_trees = r.at("n_trees").get<int>();
        c.rulefit.max_depth = r.at("max_depth").get<int>();
        c.rulefit.learning_rate = r.at("learning_rate").get<double>();
        c.rulefit.subsample = r.at("subsample").get<double>();
        c.rulefit.min_samples_leaf = r.at("min_samples_leaf").get<std::size_t>();
        c.rulefit.l1_c = r.at("l1_c").get<double>();
        c.rulefit.include_linear_terms = r.at("include_linear_terms").get<bool>();
        c.rulefit.seed = r.at("seed").get<std::uint64_t>();
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ensemble", std::string("malformed ensemble config: ") + e.what());
    }
}

EnsembleModel train_ensemble(const TimeSeries& series, const EnsembleConfig& config) {
    config.validate();
    auto plan = plan_splits(series, config.n, config.m, config.requested_splits, config.stride);
    if (config.table_length_cap && plan.splits.size() > *config.table_length_cap) {
        plan.splits.erase(plan.splits.begin(),
                          plan.splits.end() - static_cast<std::ptrdiff_t>(*config.table_length_cap));
    }
    const auto& target = series.target();
    const std::vector<double> covered(target.begin() + static_cast<std::ptrdiff_t>(plan.splits.front().train_begin),
                                      target.begin() + static_cast<std::ptrdiff_t>(plan.splits.back().predict_end));

    EnsembleModel model;
    model.config = config;
    model.standardization = fit_standardization(covered);
    const auto& catalog = default_catalog();
    model.catalog_version = catalog.version();

    TableOptions options;
    options.thresholds = config.thresholds;
    options.enet = config.enet;
    options.workers = config.workers;
    auto build =
        build_training_table(series, model.standardization, plan, config.pool, catalog, config.metric, options);
    auto discard = apply_discard_rule(build.table, config.pool);
    if (discard.pool.size() < 2) {
        throw InfeasibleError("ensemble", "only predictor '" + discard.pool.front().id +
                                              "' survives the discard rule; a classifier needs two");
    }

    LabeledRows rows;
    rows.catalog_version = catalog.version();
    rows.feature_names = discard.table.columns;
    rows.features = discard.table.values;
    for (const auto& spec : discard.pool) {
        rows.class_ids.push_back(spec.id);
    }
    for (const auto& label : discard.table.labels) {
        rows.labels.push_back(static_cast<int>(index_in(rows.class_ids, label)));
    }
    auto rulefit = config.rulefit;
    rulefit.workers = config.workers;

    model.rules = fit_rule_model(rows, rulefit);
    model.pool = std::move(discard.pool);
    model.discarded = std::move(discard.discarded);
    model.report = std::move(build.report);
    model.encoder = std::move(build.encoder);
    model.label_histogram = discard.table.label_histogram();
    model.table_rows = discard.table.labels.size();
    model.trained_through = series.timestamps().back();
    return model;
}

CombinedForecast predict_next(const EnsembleModel& model, const TimeSeries& history, std::size_t horizon) {
    const std::size_t n = model.config.n;
    if (history.size() < n) {
        throw DataError("ensemble", "history has " + std::to_string(history.size()) + " points, need n = " +
                                        std::to_string(n));
    }
    if (horizon < 1) {
        throw ConfigError("ensemble", "horizon must be >= 1");
    }
    const auto& catalog = default_catalog();
    if (model.catalog_version != catalog.version()) {
        throw DataError("ensemble", "model was trained with feature catalog '" + model.catalog_version +
                                        "' but this build provides '" + catalog.version() +
                                        "'; retrain the model to upgrade");
    }
    const std::size_t begin = history.size() - n;
    const std::span<const double> raw(history.target().data() + begin, n);
    std::vector<double> standardized(raw.size());
    std::transform(raw.begin(), raw.end(), standardized.begin(),
                   [&](double v) { return model.standardization.apply(v); });
    const auto stats = extract_features(standardized, catalog);
    const auto names = catalog.names();

    std::vector<double> row;
    for (const auto& column : model.report.final_columns) {
        row.push_back(stats[index_in(names, column)]);
    }
    std::vector<std::string> unseen;
    const auto cov = model.encoder.aggregate(history, begin, history.size(), &unseen);
    for (const auto& u : unseen) {
        spdlog::warn("ensemble: category {} was not seen in training; encoded as all zeros", u);
    }
    row.insert(row.end(), cov.begin(), cov.end());

    const auto probabilities = predict_proba(model.rules, row, catalog.version());
    std::vector<Forecast> forecasts;
    for (const auto& spec : model.pool) {
        forecasts.push_back(fit_predict(spec, raw, horizon));
    }
    return combine(probabilities, model.rules.class_ids, forecasts, model.config.top_k);
}

void save_model(const EnsembleModel& model, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("ensemble", "cannot create " + dir.string() + ": " + ec.message());
    }
    auto pool = nlohmann::json::array();
    for (const auto& spec : model.pool) {
        pool.push_back(to_json(spec));
    }
    nlohmann::json histogram = nlohmann::json::object();
    for (const auto& [id, count] : model.label_histogram) {
        histogram[id] = count;
    }
    const nlohmann::json meta = {{"format_version", kModelFormatVersion},
                                 {"catalog_version", model.catalog_version},
                                 {"config", to_json(model.config)},
                                 {"pool", pool},
                                 {"discarded", model.discarded},
                                 {"covariates", to_json(model.encoder)},
                                 {"label_histogram", histogram},
                                 {"table_rows", model.table_rows},
                                 {"trained_through", format_timestamp(model.trained_through)}};
    write_json(dir / "model.json", meta);
    write_json(dir / "rules.json", to_json(model.rules));
    write_json(dir / "reduction_report.json", to_json(model.report));
    write_json(dir / "standardization.json",
               {{"mean", model.standardization.mean}, {"std_dev", model.standardization.std_dev}});
}

EnsembleModel load_model(const std::filesystem::path& dir) {
    const auto meta = read_json(dir / "model.json");
    EnsembleModel model;
    try {
        if (meta.at("format_version").get<int>() != kModelFormatVersion) {
            throw DataError("ensemble", "unsupported model format_version " + meta.at("format_version").dump());
        }
        model.catalog_version = meta.at("catalog_version").get<std::string>();
        model.config = ensemble_config_from_json(meta.at("config"));
        for (const auto& spec : meta.at("pool")) {
            model.pool.push_back(predictor_spec_from_json(spec));
        }
        model.discarded = meta.at("discarded").get<std::vector<std::string>>();
        model.encoder = covariate_encoder_from_json(meta.at("covariates"));
        for (const auto& [id, count] : meta.at("label_histogram").items()) {
            model.label_histogram[id] = count.get<std::size_t>();
        }
        model.table_rows = meta.at("table_rows").get<std::size_t>();
        const auto through = parse_timestamp(meta.at("trained_through").get<std::string>());
        if (!through) {
            throw DataError("ensemble", "bad trained_through timestamp");
        }
        model.trained_through = *through;
        const auto scale = read_json(dir / "standardization.json");
        model.standardization = {scale.at("mean").get<double>(), scale.at("std_dev").get<double>()};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ensemble", std::string("malformed model directory: ") + e.what());
    }
    model.rules = rule_model_from_json(read_json(dir / "rules.json"));
    model.report = reduction_report_from_json(read_json(dir / "reduction_report.json"));
    std::vector<std::string> ids;
    for (const auto& spec : model.pool) {
        ids.push_back(spec.id);
    }
    if (ids != model.rules.class_ids) {
        throw DataError("ensemble", "rule model classes do not match the stored pool");
    }
    return model;
}

std::string forecast_csv(const CombinedForecast& forecast, Timestamp last, Timestamp step) {
    csv::Record header{"timestamp", "forecast"};
    for (const auto& id : forecast.ids) {
        header.push_back("weight_" + id);
    }
    std::string out = csv::join(header) + "\n";
    for (std::size_t h = 0; h < forecast.values.size(); ++h) {
        csv::Record row{format_timestamp(last + step * static_cast<Timestamp>(h + 1)),
                        csv::format_double(forecast.values[h])};
        for (double w : forecast.weights) {
            row.push_back(csv::format_double(w));
        }
        out += csv::join(row) + "\n";
    }
    return out;
}

OnlineEnsemble::OnlineEnsemble(EnsembleModel model, TimeSeries history, const DriftConfig& drift)
    : OnlineEnsemble(std::move(model), std::move(history), make_detector(drift), drift.min_interval) {}

OnlineEnsemble::OnlineEnsemble(EnsembleModel model, TimeSeries history, std::unique_ptr<DriftDetector> detector,
                               Timestamp min_interval)
    : model_(std::make_shared<const EnsembleModel>(std::move(model))),
      history_(std::move(history)),
      detector_(std::move(detector)),
      detector_scale_(model_->standardization),
      guard_{min_interval, std::nullopt} {
    if (min_interval < 0) {
        throw ConfigError("drift", "retrain interval must be >= 0");
    }
}

CombinedForecast OnlineEnsemble::forecast(std::size_t horizon) const { return predict_next(*model_, history_, horizon); }

StepResult OnlineEnsemble::step(const TimeSeries& points, std::size_t horizon) {
    history_ = history_.appended(points);
    StepResult result;
    std::optional<DriftEvent> trigger;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Timestamp ts = points.timestamps()[i];
        auto event = detector_->update(detector_scale_.apply(points.target()[i]), ts);
        if (!event) {
            continue;
        }
        const bool allowed = guard_allows(guard_, ts);
        if (allowed) {
            guard_.last_retrain = ts;
            trigger = event;
        }
        result.drifts.push_back(*event);
        result.allowed.push_back(allowed);
    }
    if (trigger) {
        RetrainEvent retrain;
        retrain.timestamp = trigger->timestamp;
        retrain.statistic = trigger->statistic;
        try {
            auto fresh = train_ensemble(history_, model_->config);
            retrain.rule_count = fresh.rules.rules.size();
            model_ = std::make_shared<const EnsembleModel>(std::move(fresh));
        } catch (const InfeasibleError& e) {
            retrain.succeeded = false;
            retrain.rule_count = model_->rules.rules.size();
            retrain.message = e.what();
            spdlog::warn("ensemble: retrain at {} failed, keeping the previous model: {}",
                         format_timestamp(retrain.timestamp), e.what());
        }
        retrains_.push_back(retrain);
        result.retrain = retrain;
    }
    result.forecast = forecast(horizon);
    return result;
}

}  // namespace regimecast
