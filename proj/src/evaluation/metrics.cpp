#include "regimecast/evaluation/metrics.hpp"

#include <cmath>
#include <string>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

void check_lengths(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.empty() || actual.size() != predicted.size()) {
        throw DataError("evaluation", "metric needs equal non-empty lengths, got " + std::to_string(actual.size()) +
                                          " and " + std::to_string(predicted.size()));
    }
}

}  // namespace

std::string_view to_string(Metric metric) {
    switch (metric) {
        case Metric::mse:
            return "MSE";
        case Metric::mae:
            return "MAE";
        case Metric::mape:
            return "MAPE";
    }
    return "MAE";
}

std::optional<Metric> metric_from_string(std::string_view name) {
    for (Metric m : {Metric::mse, Metric::mae, Metric::mape}) {
        if (name == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

double mape(std::span<const double> actual, std::span<const double> predicted, double epsilon) {
    check_lengths(actual, predicted);
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (!(std::abs(actual[i]) > epsilon)) {
            throw DataError("evaluation", "near-zero actual value at index " + std::to_string(i));
        }
        total += std::abs((actual[i] - predicted[i]) / actual[i]);
    }
    return total / static_cast<double>(actual.size()) * 100.0;
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual, predicted);
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        total += std::abs(actual[i] - predicted[i]);
    }
    return total / static_cast<double>(actual.size());
}

double mse(std::span<const double> actual, std::span<const double> predicted) {
    check_lengths(actual, predicted);
    double total = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        total += e * e;
    }
    return total / static_cast<double>(actual.size());
}

double score(Metric metric, std::span<const double> actual, std::span<const double> predicted) {
    switch (metric) {
        case Metric::mse:
            return mse(actual, predicted);
        case Metric::mae:
            return mae(actual, predicted);
        case Metric::mape:
            return mape(actual, predicted);
    }
    return mae(actual, predicted);
}

}  // namespace regimecast
