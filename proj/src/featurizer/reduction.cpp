#include "regimecast/featurizer/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>

#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"
#include "regimecast/featurizer/features.hpp"

namespace regimecast {
namespace {

constexpr const char* kModule = "featurizer";

bool values_agree(double a, double b, double tol) {
    if (is_missing(a) || is_missing(b)) {
        return is_missing(a) && is_missing(b);
    }
    return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b)) || a == b;
}

struct PairStats {
    std::optional<double> r;
    double var_a = 0.0;
    double var_b = 0.0;
};

/// Pearson correlation and variances over rows where both values exist.
PairStats pair_stats(const std::vector<double>& a, const std::vector<double>& b) {
    double sa = 0.0;
    double sb = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!is_missing(a[i]) && !is_missing(b[i])) {
            sa += a[i];
            sb += b[i];
            ++count;
        }
    }
    PairStats out;
    if (count < 2) {
        return out;
    }
    const double ma = sa / static_cast<double>(count);
    const double mb = sb / static_cast<double>(count);
    double saa = 0.0;
    double sbb = 0.0;
    double sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!is_missing(a[i]) && !is_missing(b[i])) {
            saa += (a[i] - ma) * (a[i] - ma);
            sbb += (b[i] - mb) * (b[i] - mb);
            sab += (a[i] - ma) * (b[i] - mb);
        }
    }
    out.var_a = saa / static_cast<double>(count);
    out.var_b = sbb / static_cast<double>(count);
    if (saa > 0.0 && sbb > 0.0) {
        out.r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
    }
    return out;
}

double present_variance(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t count = 0;
    for (double x : v) {
        if (!is_missing(x)) {
            sum += x;
            ++count;
        }
    }
    if (count < 2) {
        return 0.0;
    }
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (double x : v) {
        if (!is_missing(x)) {
            ss += (x - mean) * (x - mean);
        }
    }
    return ss / static_cast<double>(count);
}

}  // namespace

std::size_t FeatureMatrix::column_index(const std::string& name) const {
    const auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
        throw DataError(kModule, "feature column '" + name + "' not present");
    }
    return static_cast<std::size_t>(it - columns.begin());
}

std::string to_csv(const FeatureMatrix& matrix) {
    std::string out = csv::join(matrix.columns) + "\n";
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        csv::Record rec;
        for (double v : matrix.values.row(r)) {
            rec.push_back(csv::format_double(v));
        }
        out += csv::join(rec) + "\n";
    }
    return out;
}

void ReductionThresholds::validate() const {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(null_fraction) || !unit(similarity) || !unit(correlation) || !unit(similarity_min_r)) {
        throw ConfigError(kModule, "reduction thresholds must lie in [0, 1]");
    }
    if (!(value_tolerance >= 0.0) || !(variance_tolerance >= 0.0) || !(selection_epsilon >= 0.0)) {
        throw ConfigError(kModule, "reduction tolerances must be >= 0");
    }
}

ReductionResult reduce_features(const FeatureMatrix& matrix, std::span<const double> labels,
                                const ReductionThresholds& thresholds, const ElasticNetSpec& enet) {
    thresholds.validate();
    enet.validate();
    const std::size_t n = matrix.rows();
    if (n < 2) {
        throw DataError(kModule, "feature reduction needs at least 2 rows, got " + std::to_string(n));
    }
    if (labels.size() != n) {
        throw DataError(kModule, "label count differs from feature row count");
    }
    if (matrix.columns.size() != matrix.values.cols()) {
        throw DataError(kModule, "feature matrix column names disagree with its width");
    }

    ReductionReport report;
    report.input_columns = matrix.columns;
    std::vector<std::vector<double>> cols;
    cols.reserve(matrix.columns.size());
    for (std::size_t j = 0; j < matrix.columns.size(); ++j) {
        cols.push_back(matrix.values.column(j));
    }

    // Stage 1: null filter.
    std::vector<std::size_t> survivors;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const auto missing = std::count_if(cols[j].begin(), cols[j].end(), [](double v) { return is_missing(v); });
        const double frac = static_cast<double>(missing) / static_cast<double>(n);
        if (frac > thresholds.null_fraction) {
            report.dropped_null.push_back({matrix.columns[j], frac});
        } else {
            survivors.push_back(j);
        }
    }
    const std::size_t after_null = survivors.size();

    // Stage 2: near-duplicates (later column of the pair), then zero variance.
    {
        std::vector<std::size_t> kept;
        for (std::size_t j : survivors) {
            bool dropped = false;
            for (std::size_t i : kept) {
                std::size_t agree = 0;
                for (std::size_t r = 0; r < n; ++r) {
                    agree += values_agree(cols[i][r], cols[j][r], thresholds.value_tolerance) ? 1 : 0;
                }
                if (static_cast<double>(agree) >= thresholds.similarity * static_cast<double>(n)) {
                    report.dropped_similarity.push_back({matrix.columns[j], matrix.columns[i], "values"});
                    dropped = true;
                    break;
                }
                const auto stats = pair_stats(cols[i], cols[j]);
                const double scale = std::max(stats.var_a, stats.var_b);
                if (stats.r && *stats.r >= thresholds.similarity_min_r &&
                    std::abs(stats.var_a - stats.var_b) <= thresholds.variance_tolerance * scale) {
                    report.dropped_similarity.push_back({matrix.columns[j], matrix.columns[i], "variance"});
                    dropped = true;
                    break;
                }
            }
            if (!dropped) {
                kept.push_back(j);
            }
        }
        survivors.clear();
        for (std::size_t j : kept) {
            if (present_variance(cols[j]) > 0.0) {
                survivors.push_back(j);
            } else {
                report.dropped_low_variance.push_back(matrix.columns[j]);
            }
        }
    }
    const std::size_t after_similarity = survivors.size();

    // Stage 3: correlation filter.
    {
        std::vector<std::size_t> kept;
        for (std::size_t j : survivors) {
            bool dropped = false;
            for (std::size_t i : kept) {
                const auto stats = pair_stats(cols[i], cols[j]);
                if (stats.r && std::abs(*stats.r) >= thresholds.correlation) {
                    report.dropped_correlated.push_back({matrix.columns[j], matrix.columns[i], std::abs(*stats.r)});
                    dropped = true;
                    break;
                }
            }
            if (!dropped) {
                kept.push_back(j);
            }
        }
        survivors = std::move(kept);
    }
    const std::size_t after_correlation = survivors.size();

    auto eliminated = [&](const std::string& stage) {
        return InfeasibleError(kModule, "all feature columns eliminated at " + stage + " (input " +
                                            std::to_string(cols.size()) + ", after null filter " +
                                            std::to_string(after_null) + ", after similarity/variance " +
                                            std::to_string(after_similarity) + ", after correlation " +
                                            std::to_string(after_correlation) + ")");
    };
    if (survivors.empty()) {
        throw eliminated("the filter stages");
    }

    // Stage 4: ElasticNet selection on mean-imputed, standardized survivors.
    Matrix design(n, survivors.size());
    for (std::size_t k = 0; k < survivors.size(); ++k) {
        const auto& c = cols[survivors[k]];
        double sum = 0.0;
        std::size_t count = 0;
        for (double v : c) {
            if (!is_missing(v)) {
                sum += v;
                ++count;
            }
        }
        const double fill = sum / static_cast<double>(count);
        std::vector<double> imputed(n);
        for (std::size_t r = 0; r < n; ++r) {
            imputed[r] = is_missing(c[r]) ? fill : c[r];
        }
        const double mean = std::accumulate(imputed.begin(), imputed.end(), 0.0) / static_cast<double>(n);
        double ss = 0.0;
        for (double v : imputed) {
            ss += (v - mean) * (v - mean);
        }
        const double sd = std::sqrt(ss / static_cast<double>(n));
        for (std::size_t r = 0; r < n; ++r) {
            design(r, k) = sd > 0.0 ? (imputed[r] - mean) / sd : 0.0;
        }
    }
    const auto fit = fit_elastic_net(design, labels, enet, ColumnScaling::standardized);

    std::vector<std::size_t> selected;
    for (std::size_t k = 0; k < survivors.size(); ++k) {
        const double magnitude = std::abs(fit.weights[k]);
        const auto& name = matrix.columns[survivors[k]];
        if (magnitude > thresholds.selection_epsilon) {
            report.elasticnet_selected.push_back({name, magnitude});
            report.final_columns.push_back(name);
            selected.push_back(survivors[k]);
        } else {
            report.dropped_elasticnet.push_back({name, magnitude});
        }
    }
    if (selected.empty()) {
        throw eliminated("ElasticNet selection");
    }

    ReductionResult result;
    result.matrix.columns = report.final_columns;
    result.matrix.values = matrix.values.select_columns(selected);
    result.report = std::move(report);
    return result;
}

nlohmann::json to_json(const ReductionReport& report) {
    nlohmann::json j;
    j["input_columns"] = report.input_columns;
    j["dropped_null"] = nlohmann::json::array();
    for (const auto& d : report.dropped_null) {
        j["dropped_null"].push_back({{"name", d.name}, {"null_fraction", d.null_fraction}});
    }
    j["dropped_similarity"] = nlohmann::json::array();
    for (const auto& d : report.dropped_similarity) {
        j["dropped_similarity"].push_back({{"name", d.name}, {"duplicate_of", d.duplicate_of}, {"reason", d.reason}});
    }
    j["dropped_low_variance"] = report.dropped_low_variance;
    j["dropped_correlated"] = nlohmann::json::array();
    for (const auto& d : report.dropped_correlated) {
        j["dropped_correlated"].push_back({{"name", d.name}, {"partner", d.partner}, {"abs_r", d.abs_r}});
    }
    auto coefficient_list = [](const std::vector<CoefficientEntry>& entries) {
        auto arr = nlohmann::json::array();
        for (const auto& e : entries) {
            arr.push_back({{"name", e.name}, {"coefficient_magnitude", e.magnitude}});
        }
        return arr;
    };
    j["dropped_elasticnet"] = coefficient_list(report.dropped_elasticnet);
    j["elasticnet_selected"] = coefficient_list(report.elasticnet_selected);
    j["final_columns"] = report.final_columns;
    return j;
}

ReductionReport reduction_report_from_json(const nlohmann::json& j) {
    ReductionReport r;
    r.input_columns = j.at("input_columns").get<std::vector<std::string>>();
    for (const auto& d : j.at("dropped_null")) {
        r.dropped_null.push_back({d.at("name"), d.at("null_fraction")});
    }
    for (const auto& d : j.at("dropped_similarity")) {
        r.dropped_similarity.push_back({d.at("name"), d.at("duplicate_of"), d.at("reason")});
    }
    r.dropped_low_variance = j.at("dropped_low_variance").get<std::vector<std::string>>();
    for (const auto& d : j.at("dropped_correlated")) {
        r.dropped_correlated.push_back({d.at("name"), d.at("partner"), d.at("abs_r")});
    }
    for (const auto& d : j.at("dropped_elasticnet")) {
        r.dropped_elasticnet.push_back({d.at("name"), d.at("coefficient_magnitude")});
    }
    for (const auto& d : j.at("elasticnet_selected")) {
        r.elasticnet_selected.push_back({d.at("name"), d.at("coefficient_magnitude")});
    }
    r.final_columns = j.at("final_columns").get<std::vector<std::string>>();
    return r;
}

}  // namespace regimecast
