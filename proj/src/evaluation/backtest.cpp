#include "regimecast/evaluation/backtest.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"
#include "regimecast/core/parallel.hpp"
#include "regimecast/evaluation/metrics.hpp"

namespace regimecast {
namespace {

std::optional<double> fold_score(std::span<const double> actual, std::span<const double> predicted) {
    try {
        return mape(actual, predicted);
    } catch (const DataError& e) {
        spdlog::warn("evaluation: fold excluded: {}", e.what());
        return std::nullopt;
    }
}

void finish(ModelScore& score) {
    double total = 0.0;
    std::size_t valid = 0;
    for (const auto& v : score.fold_mape) {
        if (v) {
            total += *v;
            ++valid;
        }
    }
    score.invalid_folds = score.fold_mape.size() - valid;
    score.mean_mape = valid > 0 ? total / static_cast<double>(valid) : std::nan("");
}

}  // namespace

BacktestPlan plan_backtest(std::size_t length, double train_fraction, std::size_t step) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("evaluation", "train_fraction must be in (0, 1)");
    }
    if (step < 1) {
        throw ConfigError("evaluation", "backtest step must be >= 1");
    }
    BacktestPlan plan{train_fraction, step, {}};
    const auto first = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(length)));
    for (std::size_t start = first; start + step <= length; start += step) {
        plan.folds.push_back({start, start + step});
    }
    if (first < 2 || plan.folds.size() < 2) {
        throw DataError("evaluation", "series of " + std::to_string(length) + " points fits " +
                                          std::to_string(plan.folds.size()) + " folds, need at least 2");
    }
    return plan;
}

const ModelScore* ScoreReport::find(const std::string& name) const {
    for (const auto& m : models) {
        if (m.name == name) {
            return &m;
        }
    }
    return nullptr;
}

ScoreReport run_backtest(const TimeSeries& series, const BacktestPlan& plan, const Contenders& contenders,
                         std::size_t workers) {
    if (plan.folds.size() < 2) {
        throw DataError("evaluation", "backtest needs at least 2 folds");
    }
    if (plan.folds.back().forecast_end > series.size()) {
        throw DataError("evaluation", "backtest plan exceeds the series length");
    }
    const auto& target = series.target();
    ScoreReport report;
    report.plan = plan;
    for (const auto& f : plan.folds) {
        report.fold_starts.push_back(series.timestamps()[f.train_end]);
    }
    auto actual_of = [&](const Fold& f) {
        return std::span<const double>(target.data() + f.train_end, f.forecast_end - f.train_end);
    };

    if (contenders.ensemble) {
        const auto& config = *contenders.ensemble;
        for (const auto& spec : config.pool) {
            report.weight_ids.push_back(spec.id);
        }
        const std::size_t t0 = plan.folds.front().train_end;
        OnlineEnsemble online(train_ensemble(series.slice(0, t0), config), series.slice(0, t0), contenders.drift);
        ModelScore score{"ensemble", {}, 0.0, 0};
        CombinedForecast forecast = online.forecast(plan.step);
        for (std::size_t k = 0; k < plan.folds.size(); ++k) {
            const auto& f = plan.folds[k];
            score.fold_mape.push_back(fold_score(actual_of(f), forecast.values));
            std::vector<double> weights(report.weight_ids.size(), 0.0);
            for (std::size_t i = 0; i < forecast.ids.size(); ++i) {
                const auto it = std::find(report.weight_ids.begin(), report.weight_ids.end(), forecast.ids[i]);
                weights[static_cast<std::size_t>(it - report.weight_ids.begin())] = forecast.weights[i];
            }
            report.ensemble_weights.push_back(std::move(weights));
            if (k + 1 < plan.folds.size()) {
                auto result = online.step(series.slice(f.train_end, f.forecast_end), plan.step);
                forecast = std::move(result.forecast);
            }
        }
        for (const auto& r : online.retrains()) {
            report.retrain_timestamps.push_back(r.timestamp);
        }
        finish(score);
        report.models.push_back(std::move(score));
    }

    const std::size_t singles = contenders.singles.size();
    const std::size_t folds = plan.folds.size();
    std::vector<std::optional<double>> cells(singles * folds);
    parallel_for(cells.size(), workers, [&](std::size_t cell) {
        const auto& spec = contenders.singles[cell / folds];
        const auto& f = plan.folds[cell % folds];
        const auto forecast = fit_predict(spec, std::span(target.data(), f.train_end), plan.step);
        cells[cell] = fold_score(actual_of(f), forecast.values);
    });
    for (std::size_t s = 0; s < singles; ++s) {
        ModelScore score{contenders.singles[s].id, {}, 0.0, 0};
        score.fold_mape.assign(cells.begin() + static_cast<std::ptrdiff_t>(s * folds),
                               cells.begin() + static_cast<std::ptrdiff_t>((s + 1) * folds));
        finish(score);
        report.models.push_back(std::move(score));
    }
    return report;
}

nlohmann::json to_json(const ScoreReport& report) {
    auto folds = nlohmann::json::array();
    for (std::size_t k = 0; k < report.plan.folds.size(); ++k) {
        folds.push_back({{"train_end", report.plan.folds[k].train_end},
                         {"forecast_end", report.plan.folds[k].forecast_end},
                         {"start", format_timestamp(report.fold_starts[k])}});
    }
    auto models = nlohmann::json::array();
    for (const auto& m : report.models) {
        auto per_fold = nlohmann::json::array();
        for (const auto& v : m.fold_mape) {
            per_fold.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
        }
        models.push_back({{"name", m.name},
                          {"mean_mape", std::isnan(m.mean_mape) ? nlohmann::json(nullptr) : nlohmann::json(m.mean_mape)},
                          {"invalid_folds", m.invalid_folds},
                          {"fold_mape", per_fold}});
    }
    auto retrains = nlohmann::json::array();
    for (Timestamp t : report.retrain_timestamps) {
        retrains.push_back(format_timestamp(t));
    }
    return {{"train_fraction", report.plan.train_fraction},
            {"step", report.plan.step},
            {"folds", folds},
            {"models", models},
            {"weight_ids", report.weight_ids},
            {"ensemble_weights", report.ensemble_weights},
            {"retrain_timestamps", retrains}};
}

std::string to_csv(const ScoreReport& report) {
    std::string out = "model,fold,start,mape\n";
    for (const auto& m : report.models) {
        for (std::size_t k = 0; k < m.fold_mape.size(); ++k) {
            out += csv::join({m.name, std::to_string(k), format_timestamp(report.fold_starts[k]),
                              m.fold_mape[k] ? csv::format_double(*m.fold_mape[k]) : std::string()}) +
                   "\n";
        }
    }
    return out;
}

}  // namespace regimecast
