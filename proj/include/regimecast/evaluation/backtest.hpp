#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimecast/drift/drift.hpp"
#include "regimecast/ensemble/ensemble.hpp"

namespace regimecast {

/// Contenders train on [0, train_end) and forecast [train_end, forecast_end).
struct Fold {
    std::size_t train_end = 0;
    std::size_t forecast_end = 0;
};

struct BacktestPlan {
    double train_fraction = 0.4;
    std::size_t step = 7;
    std::vector<Fold> folds;
};

/// The first fold trains on floor(train_fraction * length) points; forecast
/// ranges of `step` points follow back to back while they fit. Throws
/// DataError when fewer than 2 folds fit.
BacktestPlan plan_backtest(std::size_t length, double train_fraction, std::size_t step);

struct ModelScore {
    std::string name;
    /// nullopt marks a fold whose MAPE was undefined (near-zero actual).
    std::vector<std::optional<double>> fold_mape;
    double mean_mape = 0.0;
    std::size_t invalid_folds = 0;
};

struct ScoreReport {
    BacktestPlan plan;
    std::vector<Timestamp> fold_starts;
    /// Ensemble first (when present), then singles in the given order.
    std::vector<ModelScore> models;
    /// Ensemble weights per fold over the candidate pool ids (0 for
    /// predictors outside the current pool).
    std::vector<std::string> weight_ids;
    std::vector<std::vector<double>> ensemble_weights;
    std::vector<Timestamp> retrain_timestamps;

    [[nodiscard]] const ModelScore* find(const std::string& name) const;
};

struct Contenders {
    std::optional<EnsembleConfig> ensemble;
    DriftConfig drift;
    std::vector<PredictorSpec> singles;
};

/// Singles refit on all data before each fold; the ensemble trains once on
/// the first fold's training range and then runs its online lifecycle fold
/// by fold. `workers` only parallelizes the singles.
ScoreReport run_backtest(const TimeSeries& series, const BacktestPlan& plan, const Contenders& contenders,
                         std::size_t workers = 1);

nlohmann::json to_json(const ScoreReport& report);
/// Flat "model,fold,start,mape" rows; invalid folds have an empty mape.
std::string to_csv(const ScoreReport& report);

}  // namespace regimecast
