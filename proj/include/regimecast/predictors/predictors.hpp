#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace regimecast {

enum class PredictorKind { seasonal_naive, drift, ses, holt_winters, ar_ols, seasonal_ar };

std::string_view to_string(PredictorKind kind);
std::optional<PredictorKind> predictor_kind_from_string(std::string_view name);

/// Kind-specific hyperparameters. Only the fields a kind uses are validated
/// and serialized.
struct PredictorParams {
    int season_length = 7;         ///< seasonal_naive, holt_winters, seasonal_ar
    double level_smoothing = 0.3;  ///< ses, holt_winters
    double trend_smoothing = 0.1;  ///< holt_winters
    double seasonal_smoothing = 0.1;  ///< holt_winters
    int order = 1;                 ///< ar_ols, seasonal_ar
};

struct PredictorSpec {
    std::string id;
    PredictorKind kind = PredictorKind::drift;
    PredictorParams params;

    void validate() const;
    /// Shortest training sequence the kind accepts.
    [[nodiscard]] std::size_t min_history() const;
};

nlohmann::json to_json(const PredictorSpec& spec);
PredictorSpec predictor_spec_from_json(const nlohmann::json& j);

/// Checks ids are unique and every spec validates.
void validate_pool(const std::vector<PredictorSpec>& pool);

struct Forecast {
    std::vector<double> values;
    std::string predictor_id;
    /// Set when a least-squares kind hit a singular system and produced the
    /// drift forecast instead.
    bool fell_back_to_drift = false;
};

/// Fits `spec` on `train` and forecasts `horizon` steps. Pure and
/// deterministic. Throws DataError on insufficient history.
Forecast fit_predict(const PredictorSpec& spec, std::span<const double> train, std::size_t horizon);

/// Least-squares autoregression with intercept on the given lags.
struct ArFit {
    double intercept = 0.0;
    std::vector<int> lags;
    std::vector<double> coefficients;
};

/// nullopt when the lag system is rank deficient or under-determined.
std::optional<ArFit> fit_autoregression(std::span<const double> train, const std::vector<int>& lags);

/// The reference Models DB: seasonal_naive, drift, ses(0.3), holt_winters,
/// ar_ols(p=7), seasonal_ar(p=2), all seasonal kinds using `season_length`.
std::vector<PredictorSpec> default_models_db(int season_length);

}  // namespace regimecast
