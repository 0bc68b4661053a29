#pragma once

#include <optional>
#include <span>
#include <string_view>

namespace regimecast {

enum class Metric { mse, mae, mape };

std::string_view to_string(Metric metric);
std::optional<Metric> metric_from_string(std::string_view name);

inline constexpr double kMapeEpsilon = 1e-8;

/// Mean absolute percentage error in percent. Throws DataError naming the
/// first index whose |actual| <= epsilon.
double mape(std::span<const double> actual, std::span<const double> predicted, double epsilon = kMapeEpsilon);
double mae(std::span<const double> actual, std::span<const double> predicted);
double mse(std::span<const double> actual, std::span<const double> predicted);

double score(Metric metric, std::span<const double> actual, std::span<const double> predicted);

}  // namespace regimecast
