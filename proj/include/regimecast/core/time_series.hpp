#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace regimecast {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

inline constexpr Timestamp kSecondsPerDay = 86400;

/// Parses "YYYY-MM-DD" or "YYYY-MM-DD[T ]HH:MM[:SS][Z]".
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Renders a timestamp as "YYYY-MM-DD" when it falls on midnight, otherwise
/// as "YYYY-MM-DDTHH:MM:SS".
std::string format_timestamp(Timestamp ts);

enum class CovariateKind { numeric, categorical };

/// How a covariate column collapses over a training window.
enum class Aggregation {
    sum,   ///< numeric columns
    mode,  ///< categorical columns, then one-hot encoded
    last,  ///< value at the last train point (date covariates)
};

/// Category used for empty categorical cells.
inline constexpr std::string_view kMissingCategory = "__missing__";

struct Covariate {
    std::string name;
    CovariateKind kind = CovariateKind::numeric;
    Aggregation aggregation = Aggregation::sum;
    std::vector<double> numeric;
    std::vector<std::string> categorical;

    [[nodiscard]] std::size_t size() const {
        return kind == CovariateKind::numeric ? numeric.size() : categorical.size();
    }

    static Covariate make_numeric(std::string name, std::vector<double> values,
                                  Aggregation aggregation = Aggregation::sum);
    static Covariate make_categorical(std::string name, std::vector<std::string> values);
};

/// Timestamped univariate target plus named covariate columns.
///
/// Immutable after construction. The constructor enforces: identical column
/// lengths >= 1, strictly increasing timestamps with a constant step, finite
/// target and numeric covariates, non-empty categorical values, unique
/// covariate names.
class TimeSeries {
public:
    TimeSeries(std::vector<Timestamp> timestamps, std::vector<double> target,
               std::vector<Covariate> covariates = {}, std::optional<Timestamp> step = std::nullopt);

    [[nodiscard]] std::size_t size() const { return target_.size(); }
    [[nodiscard]] const std::vector<Timestamp>& timestamps() const { return timestamps_; }
    [[nodiscard]] const std::vector<double>& target() const { return target_; }
    [[nodiscard]] const std::vector<Covariate>& covariates() const { return covariates_; }
    [[nodiscard]] const Covariate* find_covariate(std::string_view name) const;

    /// Inter-step delta. For single-point series this is the step supplied at
    /// construction (or inherited from the parent slice), possibly 0.
    [[nodiscard]] Timestamp step() const { return step_; }

    /// Rows [begin, end).
    [[nodiscard]] TimeSeries slice(std::size_t begin, std::size_t end) const;
    [[nodiscard]] TimeSeries tail(std::size_t count) const;
    [[nodiscard]] TimeSeries with_target(std::vector<double> target) const;
    [[nodiscard]] TimeSeries with_covariate(Covariate column) const;

    /// Concatenates `next`, which must continue this series at the same step
    /// and carry the same covariate schema.
    [[nodiscard]] TimeSeries appended(const TimeSeries& next) const;

private:
    std::vector<Timestamp> timestamps_;
    std::vector<double> target_;
    std::vector<Covariate> covariates_;
    Timestamp step_ = 0;
};

/// Column roles for CSV ingestion.
struct ColumnSchema {
    std::string date_column;
    std::string target_column;
    /// Every other column of the file, in any order.
    std::vector<std::pair<std::string, CovariateKind>> covariates;
};

TimeSeries ingest_csv(const std::string& path, const ColumnSchema& schema);
TimeSeries parse_csv(std::string_view text, const ColumnSchema& schema);

/// Writes header `date,target,<covariates...>` using the schema's names.
std::string to_csv(const TimeSeries& series, const ColumnSchema& schema);

/// z-score parameters with population standard deviation.
struct StandardizationParams {
    double mean = 0.0;
    double std_dev = 1.0;

    [[nodiscard]] double apply(double x) const { return (x - mean) / std_dev; }
    [[nodiscard]] double invert(double z) const { return z * std_dev + mean; }
    [[nodiscard]] std::vector<double> apply(const std::vector<double>& xs) const;
    [[nodiscard]] std::vector<double> invert(const std::vector<double>& zs) const;
};

StandardizationParams fit_standardization(const std::vector<double>& values);
std::pair<TimeSeries, StandardizationParams> standardize(const TimeSeries& series);

enum class DatePart { day, month, year, weekday };

std::string_view to_string(DatePart part);
std::optional<DatePart> date_part_from_string(std::string_view name);

/// Appends one last-value-aggregated numeric column per part. Weekday uses
/// Monday = 0.
TimeSeries add_date_covariates(const TimeSeries& series, const std::set<DatePart>& parts);

/// Train rows [train_begin, train_end), prediction rows [train_end, predict_end).
struct WindowSplit {
    std::size_t train_begin = 0;
    std::size_t train_end = 0;
    std::size_t predict_end = 0;

    [[nodiscard]] std::size_t train_size() const { return train_end - train_begin; }
    [[nodiscard]] std::size_t horizon() const { return predict_end - train_end; }

    friend bool operator==(const WindowSplit&, const WindowSplit&) = default;
};

struct SplitPlan {
    std::size_t n = 0;
    std::size_t m = 0;
    std::size_t stride = 1;
    std::vector<WindowSplit> splits;
};

/// Sliding windows over a series of `length` points. Without
/// `requested_splits` every window is emitted (train starts 0, stride,
/// 2*stride, ...); with it, the requested count of most recent windows.
SplitPlan plan_splits(std::size_t length, std::size_t n, std::size_t m,
                      std::optional<std::size_t> requested_splits = std::nullopt,
                      std::size_t stride = 1);

inline SplitPlan plan_splits(const TimeSeries& series, std::size_t n, std::size_t m,
                             std::optional<std::size_t> requested_splits = std::nullopt,
                             std::size_t stride = 1) {
    return plan_splits(series.size(), n, m, requested_splits, stride);
}

}  // namespace regimecast
