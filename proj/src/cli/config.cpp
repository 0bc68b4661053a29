#include "regimecast/cli/config.hpp"

#include <fstream>
#include <map>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

/// Typed access to one JSON object that remembers which keys were read, so
/// leftovers can be reported as unknown.
class Section {
public:
    Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) {
            throw ConfigError("cli", "'" + name_ + "' must be a JSON object");
        }
    }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    template <typename T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        try {
            return j_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("cli", "'" + path(key) + "' has the wrong type: " + j_.at(key).dump());
        }
    }

    std::optional<std::size_t> optional_size(const std::string& key, std::optional<std::size_t> fallback) {
        used_.insert(key);
        if (!j_.contains(key)) {
            return fallback;
        }
        if (j_.at(key).is_null()) {
            return std::nullopt;
        }
        if (!j_.at(key).is_number_unsigned()) {
            throw ConfigError("cli", "'" + path(key) + "' must be a non-negative integer or null");
        }
        return j_.at(key).get<std::size_t>();
    }

    Section child(const std::string& key) {
        used_.insert(key);
        static const nlohmann::json empty = nlohmann::json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, path(key));
    }

    const nlohmann::json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!used_.count(key)) {
                throw ConfigError("cli", "unknown config key '" + path(key) + "'");
            }
        }
    }

private:
    [[nodiscard]] std::string path(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    const nlohmann::json& j_;
    std::string name_;
    std::set<std::string> used_;
};

DataConfig parse_data(Section s, const std::filesystem::path& base_dir) {
    DataConfig data;
    data.path = s.get<std::string>("path", "");
    if (!data.path.empty() && std::filesystem::path(data.path).is_relative() && !base_dir.empty()) {
        data.path = (base_dir / data.path).lexically_normal().string();
    }
    data.schema.date_column = s.get<std::string>("date_column", "date");
    data.schema.target_column = s.get<std::string>("target_column", "value");
    const auto covariates = s.get<std::map<std::string, std::string>>("covariates", {});
    for (const auto& [name, kind] : covariates) {
        if (kind != "numeric" && kind != "categorical") {
            throw ConfigError("cli", "covariate '" + name + "' kind must be numeric or categorical, got '" + kind + "'");
        }
        data.schema.covariates.emplace_back(name, kind == "numeric" ? CovariateKind::numeric : CovariateKind::categorical);
    }
    for (const auto& part : s.get<std::vector<std::string>>("date_parts", {})) {
        const auto parsed = date_part_from_string(part);
        if (!parsed) {
            throw ConfigError("cli", "unknown date part '" + part + "' (day, month, year, weekday)");
        }
        data.date_parts.insert(*parsed);
    }
    s.finish();
    return data;
}

}  // namespace

void RunConfig::validate() const {
    if (data.path.empty()) {
        throw ConfigError("cli", "data.path is required");
    }
    if (season_length < 1) {
        throw ConfigError("cli", "season_length must be >= 1");
    }
    ensemble.validate();
    drift.kswin.validate();
    drift.adwin.validate();
    if (drift.min_interval < 0) {
        throw ConfigError("cli", "drift.min_interval_days must be >= 0");
    }
    if (!(backtest.train_fraction > 0.0 && backtest.train_fraction < 1.0)) {
        throw ConfigError("cli", "backtest.train_fraction must be in (0, 1)");
    }
    if (backtest.step < 1) {
        throw ConfigError("cli", "backtest.step must be >= 1");
    }
}

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    RunConfig c;
    Section root(j, "");
    c.data = parse_data(root.child("data"), base_dir);
    c.season_length = root.get<int>("season_length", 7);

    auto window = root.child("window");
    c.ensemble.n = window.get<std::size_t>("n", c.ensemble.n);
    c.ensemble.m = window.get<std::size_t>("m", c.ensemble.m);
    c.ensemble.stride = window.get<std::size_t>("stride", c.ensemble.stride);
    c.ensemble.requested_splits = window.optional_size("requested_splits", std::nullopt);
    window.finish();

    if (root.has("pool")) {
        const auto& pool = root.raw("pool");
        if (!pool.is_array()) {
            throw ConfigError("cli", "'pool' must be an array of predictor specs");
        }
        for (const auto& spec : pool) {
            c.ensemble.pool.push_back(predictor_spec_from_json(spec));
        }
    } else {
        c.ensemble.pool = default_models_db(std::max(c.season_length, 1));
    }
    const auto metric_name = root.get<std::string>("metric", "MAE");
    const auto metric = metric_from_string(metric_name);
    if (!metric) {
        throw ConfigError("cli", "metric must be MSE, MAE or MAPE, got '" + metric_name + "'");
    }
    c.ensemble.metric = *metric;
    c.ensemble.top_k = root.optional_size("top_k", std::nullopt);
    c.ensemble.table_length_cap = root.optional_size("table_length_cap", std::nullopt);

    auto features = root.child("features");
    c.ensemble.thresholds.null_fraction = features.get<double>("null_fraction", 0.5);
    c.ensemble.thresholds.similarity = features.get<double>("similarity", 0.95);
    c.ensemble.thresholds.correlation = features.get<double>("correlation", 0.95);
    c.ensemble.enet.alpha = features.get<double>("enet_alpha", 0.9);
    c.ensemble.enet.l1_ratio = features.get<double>("enet_l1_ratio", 0.7);
    features.finish();

    auto rulefit = root.child("rulefit");
    auto& r = c.ensemble.rulefit;
    r.n_trees = rulefit.get<int>("n_trees", r.n_trees);
    r.max_depth = rulefit.get<int>("max_depth", r.max_depth);
    r.learning_rate = rulefit.get<double>("learning_rate", r.learning_rate);
    r.subsample = rulefit.get<double>("subsample", r.subsample);
    r.min_samples_leaf = rulefit.get<std::size_t>("min_samples_leaf", r.min_samples_leaf);
    r.l1_c = rulefit.get<double>("l1_c", r.l1_c);
    r.include_linear_terms = rulefit.get<bool>("include_linear_terms", r.include_linear_terms);
    rulefit.finish();

    auto drift = root.child("drift");
    const auto detector = drift.get<std::string>("detector", "kswin");
    if (detector != "kswin" && detector != "adwin") {
        throw ConfigError("cli", "drift.detector must be kswin or adwin, got '" + detector + "'");
    }
    c.drift.detector = detector == "kswin" ? DetectorKind::kswin : DetectorKind::adwin;
    c.drift.kswin.window = drift.get<std::size_t>("window", c.drift.kswin.window);
    c.drift.kswin.sample = drift.get<std::size_t>("sample", c.drift.kswin.sample);
    c.drift.kswin.alpha = drift.get<double>("alpha", c.drift.kswin.alpha);
    c.drift.adwin.delta = drift.get<double>("delta", c.drift.adwin.delta);
    c.drift.min_interval = static_cast<Timestamp>(drift.get<double>("min_interval_days", 14.0) * kSecondsPerDay);
    drift.finish();

    auto backtest = root.child("backtest");
    c.backtest.train_fraction = backtest.get<double>("train_fraction", c.backtest.train_fraction);
    c.backtest.step = backtest.get<std::size_t>("step", c.backtest.step);
    backtest.finish();

    c.seed = root.get<std::uint64_t>("seed", 0);
    c.workers = root.get<std::size_t>("workers", 0);
    c.output_dir = root.get<std::string>("output_dir", "out");
    if (c.output_dir.is_relative() && !base_dir.empty()) {
        c.output_dir = (base_dir / c.output_dir).lexically_normal();
    }
    root.finish();

    apply_seed_and_workers(c);
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cli", "cannot read config " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cli", path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json covariates = nlohmann::json::object();
    for (const auto& [name, kind] : c.data.schema.covariates) {
        covariates[name] = kind == CovariateKind::numeric ? "numeric" : "categorical";
    }
    auto parts = nlohmann::json::array();
    for (DatePart p : c.data.date_parts) {
        parts.push_back(std::string(to_string(p)));
    }
    auto pool = nlohmann::json::array();
    for (const auto& spec : c.ensemble.pool) {
        pool.push_back(to_json(spec));
    }
    auto optional = [](const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    const auto& r = c.ensemble.rulefit;
    return {{"data",
             {{"path", c.data.path},
              {"date_column", c.data.schema.date_column},
              {"target_column", c.data.schema.target_column},
              {"covariates", covariates},
              {"date_parts", parts}}},
            {"season_length", c.season_length},
            {"window",
             {{"n", c.ensemble.n},
              {"m", c.ensemble.m},
              {"stride", c.ensemble.stride},
              {"requested_splits", optional(c.ensemble.requested_splits)}}},
            {"pool", pool},
            {"metric", std::string(to_string(c.ensemble.metric))},
            {"top_k", optional(c.ensemble.top_k)},
            {"table_length_cap", optional(c.ensemble.table_length_cap)},
            {"features",
             {{"null_fraction", c.ensemble.thresholds.null_fraction},
              {"similarity", c.ensemble.thresholds.similarity},
              {"correlation", c.ensemble.thresholds.correlation},
              {"enet_alpha", c.ensemble.enet.alpha},
              {"enet_l1_ratio", c.ensemble.enet.l1_ratio}}},
            {"rulefit",
             {{"n_trees", r.n_trees},
              {"max_depth", r.max_depth},
              {"learning_rate", r.learning_rate},
              {"subsample", r.subsample},
              {"min_samples_leaf", r.min_samples_leaf},
              {"l1_c", r.l1_c},
              {"include_linear_terms", r.include_linear_terms}}},
            {"drift",
             {{"detector", c.drift.detector == DetectorKind::kswin ? "kswin" : "adwin"},
              {"window", c.drift.kswin.window},
              {"sample", c.drift.kswin.sample},
              {"alpha", c.drift.kswin.alpha},
              {"delta", c.drift.adwin.delta},
              {"min_interval_days", static_cast<double>(c.drift.min_interval) / kSecondsPerDay}}},
            {"backtest", {{"train_fraction", c.backtest.train_fraction}, {"step", c.backtest.step}}},
            {"seed", c.seed},
            {"workers", c.workers},
            {"output_dir", c.output_dir.string()}};
}

void apply_seed_and_workers(RunConfig& config) {
    config.ensemble.rulefit.seed = config.seed;
    config.drift.kswin.seed = config.seed;
    config.ensemble.workers = config.workers;
}

TimeSeries load_series(const RunConfig& config) {
    auto series = ingest_csv(config.data.path, config.data.schema);
    if (!config.data.date_parts.empty()) {
        series = add_date_covariates(series, config.data.date_parts);
    }
    return series;
}

std::string config_reference() {
    return R"(Config file (JSON). Every key is optional except data.path; unknown keys are errors.
  data.path                 CSV file (relative paths resolve against the config file)
  data.date_column          "date"
  data.target_column        "value"
  data.covariates           {"name": "numeric" | "categorical"}; every other CSV column
  data.date_parts           subset of ["day", "month", "year", "weekday"]
  season_length             7
  window.n / m / stride     35 / 7 / 1
  window.requested_splits   null (all windows)
  pool                      predictor specs; default: the six reference predictors
  metric                    "MAE" (also "MSE", "MAPE")
  top_k                     null (use every predictor)
  table_length_cap          null (keep every row)
  features.null_fraction    0.5
  features.similarity       0.95
  features.correlation      0.95
  features.enet_alpha       0.9
  features.enet_l1_ratio    0.7
  rulefit.n_trees           100
  rulefit.max_depth         3
  rulefit.learning_rate     0.1
  rulefit.subsample         0.75
  rulefit.min_samples_leaf  5
  rulefit.l1_c              50
  rulefit.include_linear_terms  false
  drift.detector            "kswin" (or "adwin")
  drift.window / sample     100 / 30
  drift.alpha               0.005
  drift.delta               0.002 (adwin)
  drift.min_interval_days   14
  backtest.train_fraction   0.4
  backtest.step             7
  seed                      0
  workers                   0 (one per logical core)
  output_dir                "out" (relative paths resolve against the config file)
)";
}

}  // namespace regimecast
