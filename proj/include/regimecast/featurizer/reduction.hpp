#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimecast/core/matrix.hpp"
#include "regimecast/optim/elastic_net.hpp"

namespace regimecast {

/// One row per window, one named column per feature. Missing values are NaN.
struct FeatureMatrix {
    std::vector<std::string> columns;
    Matrix values;

    [[nodiscard]] std::size_t rows() const { return values.rows(); }
    [[nodiscard]] std::size_t column_index(const std::string& name) const;
};

std::string to_csv(const FeatureMatrix& matrix);

struct ReductionThresholds {
    /// Columns with a missing fraction strictly above this are dropped.
    double null_fraction = 0.5;
    /// Fraction of agreeing row values that marks a near-duplicate column.
    double similarity = 0.95;
    /// Pairs with |Pearson r| at or above this lose their later column.
    double correlation = 0.95;
    /// Relative tolerance for two row values to count as equal.
    double value_tolerance = 1e-9;
    /// Relative tolerance for "equal variance" in the variance reading of
    /// similarity, which also requires r >= similarity_min_r.
    double variance_tolerance = 5e-2;
    double similarity_min_r = 0.999;
    /// Columns with |coefficient| above this survive the ElasticNet stage.
    double selection_epsilon = 1e-8;

    void validate() const;
};

struct NullDrop {
    std::string name;
    double null_fraction = 0.0;
};

struct SimilarityDrop {
    std::string name;
    std::string duplicate_of;
    /// "values" (row agreement) or "variance" (equal variance and r ~ 1).
    std::string reason;
};

struct CorrelationDrop {
    std::string name;
    std::string partner;
    double abs_r = 0.0;
};

struct CoefficientEntry {
    std::string name;
    double magnitude = 0.0;
};

/// Accounts for every input column in exactly one bucket.
struct ReductionReport {
    std::vector<std::string> input_columns;
    std::vector<NullDrop> dropped_null;
    std::vector<SimilarityDrop> dropped_similarity;
    std::vector<std::string> dropped_low_variance;
    std::vector<CorrelationDrop> dropped_correlated;
    /// Survivors of the filters whose ElasticNet coefficient was ~0.
    std::vector<CoefficientEntry> dropped_elasticnet;
    std::vector<CoefficientEntry> elasticnet_selected;
    std::vector<std::string> final_columns;
};

nlohmann::json to_json(const ReductionReport& report);
ReductionReport reduction_report_from_json(const nlohmann::json& j);

struct ReductionResult {
    FeatureMatrix matrix;
    ReductionReport report;
};

/// Four-stage cascade, in this fixed order:
///   1. null filter (missing fraction > null_fraction);
///   2. near-duplicate filter (later column of a similar pair), then
///      zero-variance filter;
///   3. correlation filter (later column of a pair with |r| >= correlation);
///   4. ElasticNet regression of `labels` on the mean-imputed, standardized
///      survivors; columns with non-zero coefficients are kept.
/// `labels` is the numeric class index of each row; the ElasticNet stage is
/// a ranking heuristic, not a probability model.
/// Throws InfeasibleError when every column is eliminated.
ReductionResult reduce_features(const FeatureMatrix& matrix, std::span<const double> labels,
                                const ReductionThresholds& thresholds = {},
                                const ElasticNetSpec& enet = {0.9, 0.7, 10000, 1e-6});

}  // namespace regimecast
