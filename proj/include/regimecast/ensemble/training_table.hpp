#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "regimecast/core/matrix.hpp"
#include "regimecast/core/time_series.hpp"
#include "regimecast/evaluation/metrics.hpp"
#include "regimecast/featurizer/features.hpp"
#include "regimecast/featurizer/reduction.hpp"
#include "regimecast/predictors/predictors.hpp"

namespace regimecast {

/// Error of every pool predictor on one window, in pool order. A predictor
/// that throws, or whose error is not finite, scores NaN.
std::vector<double> score_pool(std::span<const double> train, std::span<const double> actual,
                               const std::vector<PredictorSpec>& pool, Metric metric);

/// Index of the smallest non-NaN score, earliest on ties.
std::optional<std::size_t> best_index(std::span<const double> scores);

/// Id of the best predictor on the window. Throws DataError when every
/// predictor fails.
std::string label_best_model(std::span<const double> train, std::span<const double> actual,
                             const std::vector<PredictorSpec>& pool, Metric metric);

/// Collapses covariate columns over a window into table columns: numeric sum
/// columns keep their name, last-value columns keep their name, categorical
/// columns expand to one indicator "name=category" per category seen at fit
/// time (sorted).
class CovariateEncoder {
public:
    struct Column {
        std::string name;
        CovariateKind kind = CovariateKind::numeric;
        Aggregation aggregation = Aggregation::sum;
        std::vector<std::string> categories;
    };

    CovariateEncoder() = default;
    explicit CovariateEncoder(std::vector<Column> columns) : columns_(std::move(columns)) {}

    /// Learns the categorical vocabulary from rows [begin, end).
    static CovariateEncoder fit(const TimeSeries& series, std::size_t begin, std::size_t end);

    [[nodiscard]] const std::vector<Column>& columns() const { return columns_; }
    [[nodiscard]] std::vector<std::string> output_names() const;

    /// Aggregates rows [begin, end). Modal categories outside the vocabulary
    /// encode as all zeros and are reported through `unseen`.
    [[nodiscard]] std::vector<double> aggregate(const TimeSeries& series, std::size_t begin, std::size_t end,
                                                std::vector<std::string>* unseen = nullptr) const;

private:
    std::vector<Column> columns_;
};

/// Most frequent value; ties go to the lexicographically smallest.
std::string modal_category(std::span<const std::string> values);

nlohmann::json to_json(const CovariateEncoder& encoder);
CovariateEncoder covariate_encoder_from_json(const nlohmann::json& j);

struct TrainingTable {
    /// Reduced statistic columns followed by covariate columns.
    std::vector<std::string> columns;
    Matrix values;
    /// Best predictor id per row.
    std::vector<std::string> labels;
    /// Per-row errors aligned with `score_ids`, kept so discarded
    /// predictors' rows can be relabeled exactly.
    std::vector<std::vector<double>> scores;
    std::vector<std::string> score_ids;
    /// Timestamp of the last train point of each row's window.
    std::vector<Timestamp> row_timestamps;
    Metric metric = Metric::mae;
    std::size_t skipped_rows = 0;

    [[nodiscard]] std::map<std::string, std::size_t> label_histogram() const;
};

struct TableOptions {
    std::optional<std::size_t> length_cap;
    ReductionThresholds thresholds;
    ElasticNetSpec enet{0.9, 0.7, 10000, 1e-6};
    std::size_t workers = 1;
};

struct TableBuild {
    TrainingTable table;
    ReductionReport report;
    CovariateEncoder encoder;
};

/// Statistics come from the standardized train points of each split; pool
/// predictors are fit and scored on the raw target. With a length cap only
/// the most recent `length_cap` splits are used. Throws InfeasibleError when
/// fewer than 2 distinct labels remain.
TableBuild build_training_table(const TimeSeries& series, const StandardizationParams& standardization,
                                const SplitPlan& plan, const std::vector<PredictorSpec>& pool,
                                const FeatureCatalog& catalog, Metric metric, const TableOptions& options = {});

struct DiscardResult {
    TrainingTable table;
    std::vector<PredictorSpec> pool;
    /// In removal order.
    std::vector<std::string> discarded;
    int passes = 0;
};

/// Repeatedly removes every predictor with at most one win and relabels its
/// rows to the best surviving predictor by stored score, until stable. Rows
/// with no surviving finite score are dropped. Throws InfeasibleError if the
/// pool would become empty.
DiscardResult apply_discard_rule(const TrainingTable& table, const std::vector<PredictorSpec>& pool);

}  // namespace regimecast
