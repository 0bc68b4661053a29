#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimecast/core/time_series.hpp"
#include "regimecast/drift/drift.hpp"
#include "regimecast/ensemble/training_table.hpp"
#include "regimecast/rulefit/rule_model.hpp"

namespace regimecast {

struct CombinedForecast {
    std::vector<double> values;
    std::vector<std::string> ids;
    /// Weights actually applied, after any top-k restriction.
    std::vector<double> weights;
    /// One forecast per id.
    std::vector<std::vector<double>> forecasts;
};

/// values[h] = sum_i weights[i] * forecasts[i][h]. With top_k the k largest
/// probabilities (earlier id on ties) are renormalized and the rest zeroed;
/// k >= size leaves the vector untouched.
CombinedForecast combine(std::span<const double> probabilities, const std::vector<std::string>& probability_ids,
                         const std::vector<Forecast>& forecasts, std::optional<std::size_t> top_k = std::nullopt);

/// Weights after the top-k restriction.
std::vector<double> restrict_top_k(std::span<const double> probabilities, std::optional<std::size_t> top_k);

struct EnsembleConfig {
    std::size_t n = 35;
    std::size_t m = 7;
    std::size_t stride = 1;
    std::optional<std::size_t> requested_splits;
    std::optional<std::size_t> table_length_cap;
    /// Candidate pool; the trained model keeps the survivors of the discard
    /// rule and every retrain starts again from this list.
    std::vector<PredictorSpec> pool;
    Metric metric = Metric::mae;
    std::optional<std::size_t> top_k;
    ReductionThresholds thresholds;
    ElasticNetSpec enet{0.9, 0.7, 10000, 1e-6};
    RuleFitConfig rulefit;
    std::size_t workers = 1;

    void validate() const;
};

nlohmann::json to_json(const EnsembleConfig& config);
EnsembleConfig ensemble_config_from_json(const nlohmann::json& j);

struct EnsembleModel {
    EnsembleConfig config;
    std::vector<PredictorSpec> pool;
    std::vector<std::string> discarded;
    RuleModel rules;
    ReductionReport report;
    StandardizationParams standardization;
    CovariateEncoder encoder;
    std::string catalog_version;
    std::map<std::string, std::size_t> label_histogram;
    std::size_t table_rows = 0;
    Timestamp trained_through = 0;
};

/// Plans splits over `series`, builds the table, applies the discard rule
/// and fits the rule model. Uses the default feature catalog.
EnsembleModel train_ensemble(const TimeSeries& series, const EnsembleConfig& config);

/// Forecasts `horizon` steps after the end of `history` from its last n
/// points.
CombinedForecast predict_next(const EnsembleModel& model, const TimeSeries& history, std::size_t horizon);

void save_model(const EnsembleModel& model, const std::filesystem::path& dir);
EnsembleModel load_model(const std::filesystem::path& dir);

/// "timestamp,forecast,weight_<id>..." with one row per horizon step,
/// starting one step after `last`.
std::string forecast_csv(const CombinedForecast& forecast, Timestamp last, Timestamp step);

struct RetrainEvent {
    Timestamp timestamp = 0;
    double statistic = 0.0;
    std::size_t rule_count = 0;
    bool succeeded = true;
    std::string message;
};

struct StepResult {
    std::vector<DriftEvent> drifts;
    /// Parallel to `drifts`: whether the guard allowed a retrain.
    std::vector<bool> allowed;
    std::optional<RetrainEvent> retrain;
    CombinedForecast forecast;
};

/// Serving loop: appends points, runs the detector on their standardized
/// targets, retrains when drift fires and the guard allows, then forecasts.
/// The current model is an immutable snapshot replaced as a whole.
class OnlineEnsemble {
public:
    OnlineEnsemble(EnsembleModel model, TimeSeries history, const DriftConfig& drift);
    OnlineEnsemble(EnsembleModel model, TimeSeries history, std::unique_ptr<DriftDetector> detector,
                   Timestamp min_interval);

    /// `points` must continue the stored history.
    StepResult step(const TimeSeries& points, std::size_t horizon);
    [[nodiscard]] CombinedForecast forecast(std::size_t horizon) const;

    [[nodiscard]] std::shared_ptr<const EnsembleModel> model() const { return model_; }
    [[nodiscard]] const TimeSeries& history() const { return history_; }
    [[nodiscard]] const std::vector<RetrainEvent>& retrains() const { return retrains_; }

private:
    std::shared_ptr<const EnsembleModel> model_;
    TimeSeries history_;
    std::unique_ptr<DriftDetector> detector_;
    StandardizationParams detector_scale_;
    RetrainGuard guard_;
    std::vector<RetrainEvent> retrains_;
};

}  // namespace regimecast
