#include "regimecast/predictors/predictors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

constexpr const char* kModule = "predictors";

bool is_seasonal(PredictorKind kind) {
    return kind == PredictorKind::seasonal_naive || kind == PredictorKind::holt_winters ||
           kind == PredictorKind::seasonal_ar;
}

std::vector<int> lags_for(const PredictorSpec& spec) {
    std::vector<int> lags;
    for (int l = 1; l <= spec.params.order; ++l) {
        lags.push_back(l);
    }
    if (spec.kind == PredictorKind::seasonal_ar && spec.params.season_length > spec.params.order) {
        lags.push_back(spec.params.season_length);
    }
    return lags;
}

std::vector<double> drift_forecast(std::span<const double> train, std::size_t horizon) {
    const double first = train.front();
    const double last = train.back();
    const double slope = train.size() > 1 ? (last - first) / static_cast<double>(train.size() - 1) : 0.0;
    std::vector<double> out(horizon);
    for (std::size_t h = 1; h <= horizon; ++h) {
        out[h - 1] = last + static_cast<double>(h) * slope;
    }
    return out;
}

std::vector<double> seasonal_naive_forecast(std::span<const double> train, std::size_t s, std::size_t horizon) {
    const std::size_t n = train.size();
    std::vector<double> out(horizon);
    for (std::size_t h = 1; h <= horizon; ++h) {
        out[h - 1] = train[n - s + ((h - 1) % s)];
    }
    return out;
}

std::vector<double> ses_forecast(std::span<const double> train, double alpha, std::size_t horizon) {
    double level = train.front();
    for (std::size_t t = 1; t < train.size(); ++t) {
        level = alpha * train[t] + (1.0 - alpha) * level;
    }
    return std::vector<double>(horizon, level);
}

std::vector<double> holt_winters_forecast(std::span<const double> train, const PredictorParams& p,
                                          std::size_t horizon) {
    const auto s = static_cast<std::size_t>(p.season_length);
    const double sd = static_cast<double>(s);
    double level = std::accumulate(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(s), 0.0) / sd;
    double trend = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        trend += (train[s + i] - train[i]) / sd;
    }
    trend /= sd;
    std::vector<double> seasonal(train.size() + horizon);
    for (std::size_t i = 0; i < s; ++i) {
        seasonal[i] = train[i] - level;
    }
    for (std::size_t t = s; t < train.size(); ++t) {
        const double prev_level = level;
        level = p.level_smoothing * (train[t] - seasonal[t - s]) + (1.0 - p.level_smoothing) * (level + trend);
        trend = p.trend_smoothing * (level - prev_level) + (1.0 - p.trend_smoothing) * trend;
        seasonal[t] = p.seasonal_smoothing * (train[t] - level) + (1.0 - p.seasonal_smoothing) * seasonal[t - s];
    }
    const std::size_t n = train.size();
    std::vector<double> out(horizon);
    for (std::size_t h = 1; h <= horizon; ++h) {
        out[h - 1] = level + static_cast<double>(h) * trend + seasonal[n - s + ((h - 1) % s)];
    }
    return out;
}

std::vector<double> ar_forecast(std::span<const double> train, const ArFit& fit, std::size_t horizon) {
    std::vector<double> history(train.begin(), train.end());
    history.reserve(train.size() + horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        double next = fit.intercept;
        for (std::size_t k = 0; k < fit.lags.size(); ++k) {
            next += fit.coefficients[k] * history[history.size() - static_cast<std::size_t>(fit.lags[k])];
        }
        history.push_back(next);
    }
    return {history.end() - static_cast<std::ptrdiff_t>(horizon), history.end()};
}

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(PredictorKind kind) {
    switch (kind) {
        case PredictorKind::seasonal_naive: return "seasonal_naive";
        case PredictorKind::drift: return "drift";
        case PredictorKind::ses: return "ses";
        case PredictorKind::holt_winters: return "holt_winters";
        case PredictorKind::ar_ols: return "ar_ols";
        case PredictorKind::seasonal_ar: return "seasonal_ar";
    }
    return "";
}

std::optional<PredictorKind> predictor_kind_from_string(std::string_view name) {
    for (auto kind : {PredictorKind::seasonal_naive, PredictorKind::drift, PredictorKind::ses,
                      PredictorKind::holt_winters, PredictorKind::ar_ols, PredictorKind::seasonal_ar}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    return std::nullopt;
}

void PredictorSpec::validate() const {
    if (id.empty()) {
        throw ConfigError(kModule, "predictor id must not be empty");
    }
    auto smoothing_ok = [](double v) { return v > 0.0 && v <= 1.0; };
    if (is_seasonal(kind) && params.season_length < 1) {
        throw ConfigError(kModule, "predictor '" + id + "': season length must be >= 1");
    }
    if ((kind == PredictorKind::ses || kind == PredictorKind::holt_winters) && !smoothing_ok(params.level_smoothing)) {
        throw ConfigError(kModule, "predictor '" + id + "': level smoothing must lie in (0, 1]");
    }
    if (kind == PredictorKind::holt_winters &&
        (!smoothing_ok(params.trend_smoothing) || !smoothing_ok(params.seasonal_smoothing))) {
        throw ConfigError(kModule, "predictor '" + id + "': trend/seasonal smoothing must lie in (0, 1]");
    }
    if ((kind == PredictorKind::ar_ols || kind == PredictorKind::seasonal_ar) && params.order < 1) {
        throw ConfigError(kModule, "predictor '" + id + "': AR order must be >= 1");
    }
}

std::size_t PredictorSpec::min_history() const {
    const auto s = static_cast<std::size_t>(std::max(params.season_length, 1));
    const auto p = static_cast<std::size_t>(std::max(params.order, 1));
    switch (kind) {
        case PredictorKind::seasonal_naive: return s + 1;
        case PredictorKind::drift: return 2;
        case PredictorKind::ses: return 1;
        case PredictorKind::holt_winters: return std::max<std::size_t>(2 * s, s + 1);
        case PredictorKind::ar_ols: return p + 1;
        case PredictorKind::seasonal_ar: return std::max(p, s) + 1;
    }
    return 1;
}

nlohmann::json to_json(const PredictorSpec& spec) {
    nlohmann::json j = {{"id", spec.id}, {"kind", std::string(to_string(spec.kind))}};
    const auto& p = spec.params;
    switch (spec.kind) {
        case PredictorKind::seasonal_naive: j["season_length"] = p.season_length; break;
        case PredictorKind::drift: break;
        case PredictorKind::ses: j["level_smoothing"] = p.level_smoothing; break;
        case PredictorKind::holt_winters:
            j["season_length"] = p.season_length;
            j["level_smoothing"] = p.level_smoothing;
            j["trend_smoothing"] = p.trend_smoothing;
            j["seasonal_smoothing"] = p.seasonal_smoothing;
            break;
        case PredictorKind::ar_ols: j["order"] = p.order; break;
        case PredictorKind::seasonal_ar:
            j["order"] = p.order;
            j["season_length"] = p.season_length;
            break;
    }
    return j;
}

PredictorSpec predictor_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError(kModule, "predictor spec must be a JSON object");
    }
    PredictorSpec spec;
    static const std::set<std::string> known = {"id",           "kind",           "season_length",     "level_smoothing",
                                                "trend_smoothing", "seasonal_smoothing", "order"};
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ConfigError(kModule, "unknown predictor key '" + key + "'");
        }
    }
    try {
        spec.id = j.at("id").get<std::string>();
        const auto kind_name = j.at("kind").get<std::string>();
        const auto kind = predictor_kind_from_string(kind_name);
        if (!kind) {
            throw ConfigError(kModule, "unknown predictor kind '" + kind_name + "'");
        }
        spec.kind = *kind;
        spec.params.season_length = j.value("season_length", spec.params.season_length);
        spec.params.level_smoothing = j.value("level_smoothing", spec.params.level_smoothing);
        spec.params.trend_smoothing = j.value("trend_smoothing", spec.params.trend_smoothing);
        spec.params.seasonal_smoothing = j.value("seasonal_smoothing", spec.params.seasonal_smoothing);
        spec.params.order = j.value("order", spec.params.order);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(kModule, std::string("malformed predictor spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

void validate_pool(const std::vector<PredictorSpec>& pool) {
    if (pool.empty()) {
        throw ConfigError(kModule, "predictor pool is empty");
    }
    std::set<std::string> ids;
    for (const auto& spec : pool) {
        spec.validate();
        if (!ids.insert(spec.id).second) {
            throw ConfigError(kModule, "duplicate predictor id '" + spec.id + "'");
        }
    }
}

std::optional<ArFit> fit_autoregression(std::span<const double> train, const std::vector<int>& lags) {
    if (lags.empty()) {
        return std::nullopt;
    }
    const auto max_lag = static_cast<std::size_t>(*std::max_element(lags.begin(), lags.end()));
    if (train.size() <= max_lag) {
        return std::nullopt;
    }
    const std::size_t rows = train.size() - max_lag;
    const std::size_t cols = lags.size() + 1;
    if (rows < cols) {
        return std::nullopt;
    }
    Eigen::MatrixXd design(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    Eigen::VectorXd response(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + max_lag;
        const auto ri = static_cast<Eigen::Index>(r);
        design(ri, 0) = 1.0;
        for (std::size_t k = 0; k < lags.size(); ++k) {
            design(ri, static_cast<Eigen::Index>(k + 1)) = train[t - static_cast<std::size_t>(lags[k])];
        }
        response(ri) = train[t];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(cols)) {
        return std::nullopt;
    }
    const Eigen::VectorXd beta = qr.solve(response);
    if (!beta.allFinite()) {
        return std::nullopt;
    }
    ArFit fit;
    fit.intercept = beta(0);
    fit.lags = lags;
    for (std::size_t k = 0; k < lags.size(); ++k) {
        fit.coefficients.push_back(beta(static_cast<Eigen::Index>(k + 1)));
    }
    return fit;
}

Forecast fit_predict(const PredictorSpec& spec, std::span<const double> train, std::size_t horizon) {
    spec.validate();
    if (horizon < 1) {
        throw DataError(kModule, "forecast horizon must be >= 1");
    }
    if (train.size() < spec.min_history()) {
        throw DataError(kModule, "predictor '" + spec.id + "' needs at least " + std::to_string(spec.min_history()) +
                                     " points, got " + std::to_string(train.size()));
    }
    for (double v : train) {
        if (!std::isfinite(v)) {
            throw DataError(kModule, "predictor '" + spec.id + "' received a non-finite training value");
        }
    }

    Forecast out;
    out.predictor_id = spec.id;
    const auto s = static_cast<std::size_t>(spec.params.season_length);
    switch (spec.kind) {
        case PredictorKind::seasonal_naive: out.values = seasonal_naive_forecast(train, s, horizon); break;
        case PredictorKind::drift: out.values = drift_forecast(train, horizon); break;
        case PredictorKind::ses: out.values = ses_forecast(train, spec.params.level_smoothing, horizon); break;
        case PredictorKind::holt_winters: out.values = holt_winters_forecast(train, spec.params, horizon); break;
        case PredictorKind::ar_ols:
        case PredictorKind::seasonal_ar: {
            const auto fit = fit_autoregression(train, lags_for(spec));
            if (fit) {
                out.values = ar_forecast(train, *fit, horizon);
            }
            if (!fit || !all_finite(out.values)) {
                out.values = drift_forecast(train, horizon);
                out.fell_back_to_drift = true;
            }
            break;
        }
    }
    if (!all_finite(out.values)) {
        throw DataError(kModule, "predictor '" + spec.id + "' produced a non-finite forecast");
    }
    return out;
}

std::vector<PredictorSpec> default_models_db(int season_length) {
    std::vector<PredictorSpec> pool;
    PredictorParams p;
    p.season_length = season_length;

    pool.push_back({"seasonal_naive", PredictorKind::seasonal_naive, p});
    pool.push_back({"drift", PredictorKind::drift, p});

    PredictorParams ses = p;
    ses.level_smoothing = 0.3;
    pool.push_back({"ses", PredictorKind::ses, ses});

    PredictorParams hw = p;
    hw.level_smoothing = 0.2;
    hw.trend_smoothing = 0.1;
    hw.seasonal_smoothing = 0.1;
    pool.push_back({"holt_winters", PredictorKind::holt_winters, hw});

    PredictorParams ar = p;
    ar.order = 7;
    pool.push_back({"ar_ols", PredictorKind::ar_ols, ar});

    PredictorParams sar = p;
    sar.order = 2;
    pool.push_back({"seasonal_ar", PredictorKind::seasonal_ar, sar});

    validate_pool(pool);
    return pool;
}

}  // namespace regimecast
