#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "regimecast/core/time_series.hpp"
#include "regimecast/drift/drift.hpp"
#include "regimecast/ensemble/ensemble.hpp"

namespace regimecast {

struct DataConfig {
    std::string path;
    ColumnSchema schema{"date", "value", {}};
    std::set<DatePart> date_parts;
};

struct BacktestConfig {
    double train_fraction = 0.4;
    std::size_t step = 7;
};

/// Everything one CLI run needs. Read from a JSON file whose keys mirror
/// the fields below; unknown keys are rejected and the whole config is
/// validated before any work starts.
struct RunConfig {
    DataConfig data;
    int season_length = 7;
    EnsembleConfig ensemble;
    DriftConfig drift;
    BacktestConfig backtest;
    std::uint64_t seed = 0;
    /// 0 means one worker per logical core.
    std::size_t workers = 0;
    std::filesystem::path output_dir = "out";

    void validate() const;
};

/// Parses and validates. Relative data paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Resolved config with every default spelled out.
nlohmann::json to_json(const RunConfig& config);

/// Propagates seed and worker count into the nested component configs.
void apply_seed_and_workers(RunConfig& config);

/// Loads the configured CSV and appends any requested date covariates.
TimeSeries load_series(const RunConfig& config);

/// Help text describing the config file layout and defaults.
std::string config_reference();

}  // namespace regimecast
