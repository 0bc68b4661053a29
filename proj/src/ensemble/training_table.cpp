#include "regimecast/ensemble/training_table.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "regimecast/core/error.hpp"
#include "regimecast/core/parallel.hpp"

namespace regimecast {
namespace {

std::string histogram_text(const std::map<std::string, std::size_t>& histogram) {
    std::string out;
    for (const auto& [id, count] : histogram) {
        out += (out.empty() ? "" : ", ") + id + "=" + std::to_string(count);
    }
    return out.empty() ? "(empty)" : out;
}

}  // namespace

std::vector<double> score_pool(std::span<const double> train, std::span<const double> actual,
                               const std::vector<PredictorSpec>& pool, Metric metric) {
    std::vector<double> scores(pool.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < pool.size(); ++k) {
        try {
            const auto forecast = fit_predict(pool[k], train, actual.size());
            const double s = score(metric, actual, forecast.values);
            if (std::isfinite(s)) {
                scores[k] = s;
            }
        } catch (const Error& e) {
            spdlog::debug("predictor {} failed on window: {}", pool[k].id, e.what());
        }
    }
    return scores;
}

std::optional<std::size_t> best_index(std::span<const double> scores) {
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (std::isnan(scores[k])) {
            continue;
        }
        if (!best || scores[k] < scores[*best]) {
            best = k;
        }
    }
    return best;
}

std::string label_best_model(std::span<const double> train, std::span<const double> actual,
                             const std::vector<PredictorSpec>& pool, Metric metric) {
    if (pool.empty()) {
        throw ConfigError("ensemble", "predictor pool is empty");
    }
    for (double v : actual) {
        if (!std::isfinite(v)) {
            throw DataError("ensemble", "actual values must be finite");
        }
    }
    const auto scores = score_pool(train, actual, pool, metric);
    const auto best = best_index(scores);
    if (!best) {
        throw DataError("ensemble", "every predictor failed on the window");
    }
    return pool[*best].id;
}

std::string modal_category(std::span<const std::string> values) {
    std::map<std::string, std::size_t> counts;
    for (const auto& v : values) {
        ++counts[v];
    }
    std::string best;
    std::size_t best_count = 0;
    for (const auto& [value, count] : counts) {
        if (count > best_count) {
            best = value;
            best_count = count;
        }
    }
    return best;
}

CovariateEncoder CovariateEncoder::fit(const TimeSeries& series, std::size_t begin, std::size_t end) {
    std::vector<Column> columns;
    for (const auto& cov : series.covariates()) {
        Column col{cov.name, cov.kind, cov.aggregation, {}};
        if (cov.kind == CovariateKind::categorical) {
            std::set<std::string> seen(cov.categorical.begin() + static_cast<std::ptrdiff_t>(begin),
                                       cov.categorical.begin() + static_cast<std::ptrdiff_t>(end));
            col.categories.assign(seen.begin(), seen.end());
        }
        columns.push_back(std::move(col));
    }
    return CovariateEncoder(std::move(columns));
}

std::vector<std::string> CovariateEncoder::output_names() const {
    std::vector<std::string> names;
    for (const auto& col : columns_) {
        if (col.kind == CovariateKind::categorical) {
            for (const auto& c : col.categories) {
                names.push_back(col.name + "=" + c);
            }
        } else {
            names.push_back(col.name);
        }
    }
    return names;
}

std::vector<double> CovariateEncoder::aggregate(const TimeSeries& series, std::size_t begin, std::size_t end,
                                                std::vector<std::string>* unseen) const {
    if (begin >= end || end > series.size()) {
        throw DataError("ensemble", "covariate window is empty or out of range");
    }
    std::vector<double> row;
    for (const auto& col : columns_) {
        const Covariate* cov = series.find_covariate(col.name);
        if (cov == nullptr || cov->kind != col.kind) {
            throw DataError("ensemble", "series lacks covariate '" + col.name + "' seen at training time");
        }
        if (col.kind == CovariateKind::categorical) {
            const std::span<const std::string> window(cov->categorical.data() + begin, end - begin);
            const auto mode = modal_category(window);
            bool known = false;
            for (const auto& c : col.categories) {
                row.push_back(c == mode ? 1.0 : 0.0);
                known = known || c == mode;
            }
            if (!known && unseen != nullptr) {
                unseen->push_back(col.name + "=" + mode);
            }
        } else if (col.aggregation == Aggregation::last) {
            row.push_back(cov->numeric[end - 1]);
        } else {
            double total = 0.0;
            for (std::size_t i = begin; i < end; ++i) {
                total += cov->numeric[i];
            }
            row.push_back(total);
        }
    }
    return row;
}

nlohmann::json to_json(const CovariateEncoder& encoder) {
    auto out = nlohmann::json::array();
    for (const auto& col : encoder.columns()) {
        const char* aggregation = col.aggregation == Aggregation::sum ? "sum"
                                  : col.aggregation == Aggregation::mode ? "mode"
                                                                         : "last";
        out.push_back({{"name", col.name},
                       {"kind", col.kind == CovariateKind::numeric ? "numeric" : "categorical"},
                       {"aggregation", aggregation},
                       {"categories", col.categories}});
    }
    return out;
}

CovariateEncoder covariate_encoder_from_json(const nlohmann::json& j) {
    std::vector<CovariateEncoder::Column> columns;
    try {
        for (const auto& c : j) {
            CovariateEncoder::Column col;
            col.name = c.at("name").get<std::string>();
            const auto kind = c.at("kind").get<std::string>();
            const auto aggregation = c.at("aggregation").get<std::string>();
            if ((kind != "numeric" && kind != "categorical") ||
                (aggregation != "sum" && aggregation != "mode" && aggregation != "last")) {
                throw DataError("ensemble", "bad covariate encoder entry for '" + col.name + "'");
            }
            col.kind = kind == "numeric" ? CovariateKind::numeric : CovariateKind::categorical;
            col.aggregation = aggregation == "sum" ? Aggregation::sum
                              : aggregation == "mode" ? Aggregation::mode
                                                      : Aggregation::last;
            col.categories = c.at("categories").get<std::vector<std::string>>();
            columns.push_back(std::move(col));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ensemble", std::string("malformed covariate encoder: ") + e.what());
    }
    return CovariateEncoder(std::move(columns));
}

std::map<std::string, std::size_t> TrainingTable::label_histogram() const {
    std::map<std::string, std::size_t> histogram;
    for (const auto& label : labels) {
        ++histogram[label];
    }
    return histogram;
}

TableBuild build_training_table(const TimeSeries& series, const StandardizationParams& standardization,
                                const SplitPlan& plan, const std::vector<PredictorSpec>& pool,
                                const FeatureCatalog& catalog, Metric metric, const TableOptions& options) {
    validate_pool(pool);
    if (pool.empty()) {
        throw ConfigError("ensemble", "predictor pool is empty");
    }
    std::vector<WindowSplit> splits = plan.splits;
    if (options.length_cap && splits.size() > *options.length_cap) {
        splits.erase(splits.begin(), splits.end() - static_cast<std::ptrdiff_t>(*options.length_cap));
    }
    if (splits.empty()) {
        throw DataError("ensemble", "split plan is empty");
    }
    if (splits.back().predict_end > series.size()) {
        throw DataError("ensemble", "split plan exceeds the series length");
    }

    const auto& raw = series.target();
    const auto standardized = standardization.apply(raw);
    std::vector<std::vector<double>> features(splits.size());
    std::vector<std::vector<double>> scores(splits.size());
    parallel_for(splits.size(), options.workers, [&](std::size_t i) {
        const auto& s = splits[i];
        features[i] = extract_features(std::span(standardized).subspan(s.train_begin, s.train_size()), catalog);
        scores[i] = score_pool(std::span(raw).subspan(s.train_begin, s.train_size()),
                               std::span(raw).subspan(s.train_end, s.horizon()), pool, metric);
    });

    TrainingTable table;
    table.metric = metric;
    for (const auto& spec : pool) {
        table.score_ids.push_back(spec.id);
    }
    std::vector<std::size_t> kept;
    std::vector<double> label_index;
    for (std::size_t i = 0; i < splits.size(); ++i) {
        const auto best = best_index(scores[i]);
        if (!best) {
            spdlog::warn("ensemble: every predictor failed on the window ending {}; row skipped",
                         format_timestamp(series.timestamps()[splits[i].train_end - 1]));
            ++table.skipped_rows;
            continue;
        }
        kept.push_back(i);
        label_index.push_back(static_cast<double>(*best));
        table.labels.push_back(pool[*best].id);
        table.scores.push_back(std::move(scores[i]));
        table.row_timestamps.push_back(series.timestamps()[splits[i].train_end - 1]);
    }
    const auto histogram = table.label_histogram();
    if (histogram.size() < 2) {
        throw InfeasibleError("ensemble", "need at least 2 distinct best-model labels, histogram: " +
                                              histogram_text(histogram));
    }

    FeatureMatrix stats;
    stats.columns = catalog.names();
    stats.values = Matrix(kept.size(), catalog.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        std::copy(features[kept[r]].begin(), features[kept[r]].end(), stats.values.row(r).begin());
    }
    auto reduced = reduce_features(stats, label_index, options.thresholds, options.enet);

    TableBuild build;
    build.encoder = CovariateEncoder::fit(series, splits.front().train_begin, splits.back().train_end);
    const auto covariate_names = build.encoder.output_names();
    for (const auto& name : covariate_names) {
        if (std::find(stats.columns.begin(), stats.columns.end(), name) != stats.columns.end()) {
            throw DataError("ensemble", "covariate column '" + name + "' collides with a statistic name");
        }
    }
    table.columns = reduced.matrix.columns;
    table.columns.insert(table.columns.end(), covariate_names.begin(), covariate_names.end());
    const std::size_t stat_cols = reduced.matrix.columns.size();
    table.values = Matrix(kept.size(), table.columns.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        auto row = table.values.row(r);
        const auto stat_row = reduced.matrix.values.row(r);
        std::copy(stat_row.begin(), stat_row.end(), row.begin());
        const auto& s = splits[kept[r]];
        const auto cov = build.encoder.aggregate(series, s.train_begin, s.train_end);
        std::copy(cov.begin(), cov.end(), row.begin() + static_cast<std::ptrdiff_t>(stat_cols));
    }
    build.table = std::move(table);
    build.report = std::move(reduced.report);
    return build;
}

DiscardResult apply_discard_rule(const TrainingTable& table, const std::vector<PredictorSpec>& pool) {
    DiscardResult result;
    result.table = table;
    result.pool = pool;
    auto& t = result.table;

    auto score_column = [&](const std::string& id) {
        const auto it = std::find(t.score_ids.begin(), t.score_ids.end(), id);
        if (it == t.score_ids.end()) {
            throw DataError("ensemble", "no stored scores for predictor '" + id + "'");
        }
        return static_cast<std::size_t>(it - t.score_ids.begin());
    };

    for (;;) {
        const auto histogram = t.label_histogram();
        std::vector<std::string> losers;
        std::vector<PredictorSpec> survivors;
        for (const auto& spec : result.pool) {
            const auto it = histogram.find(spec.id);
            if (it == histogram.end() || it->second <= 1) {
                losers.push_back(spec.id);
            } else {
                survivors.push_back(spec);
            }
        }
        if (losers.empty()) {
            break;
        }
        if (survivors.empty()) {
            throw InfeasibleError("ensemble", "discard rule would empty the predictor pool, histogram: " +
                                                  histogram_text(histogram));
        }
        ++result.passes;
        result.discarded.insert(result.discarded.end(), losers.begin(), losers.end());
        result.pool = std::move(survivors);

        std::vector<std::size_t> columns;
        for (const auto& spec : result.pool) {
            columns.push_back(score_column(spec.id));
        }
        std::vector<std::size_t> keep;
        for (std::size_t r = 0; r < t.labels.size(); ++r) {
            if (std::find(losers.begin(), losers.end(), t.labels[r]) == losers.end()) {
                keep.push_back(r);
                continue;
            }
            std::vector<double> remaining;
            for (std::size_t c : columns) {
                remaining.push_back(t.scores[r][c]);
            }
            if (const auto best = best_index(remaining)) {
                t.labels[r] = result.pool[*best].id;
                keep.push_back(r);
            }
        }
        if (keep.size() != t.labels.size()) {
            TrainingTable pruned = t;
            pruned.values = t.values.select_rows(keep);
            pruned.labels.clear();
            pruned.scores.clear();
            pruned.row_timestamps.clear();
            for (std::size_t r : keep) {
                pruned.labels.push_back(t.labels[r]);
                pruned.scores.push_back(t.scores[r]);
                pruned.row_timestamps.push_back(t.row_timestamps[r]);
            }
            pruned.skipped_rows += t.labels.size() - keep.size();
            t = std::move(pruned);
        }
    }
    return result;
}

}  // namespace regimecast
