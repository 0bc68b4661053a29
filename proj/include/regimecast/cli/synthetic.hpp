#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "regimecast/core/time_series.hpp"

namespace regimecast {

enum class Regime { sinusoid, trend, burst };

std::string_view to_string(Regime regime);

/// Regime-switching daily series cycling sinusoid -> linear trend -> noise
/// burst. Trend segments alternate between rising and falling so the level
/// stays within [base_level, base_level + segment_length * trend_slope].
struct SyntheticSpec {
    std::size_t segments = 9;
    std::size_t segment_length = 100;
    double base_level = 100.0;
    double amplitude = 10.0;
    int period = 7;
    double sinusoid_noise = 0.0;
    double trend_slope = 0.5;
    double trend_noise = 1.0;
    double burst_noise = 6.0;
    /// Probability that a row's regime_hint names a random regime instead
    /// of the true one.
    double hint_noise = 0.1;
    std::uint64_t seed = 7;
    std::string start_date = "2020-01-01";
};

struct SyntheticSeries {
    TimeSeries series;
    /// True regime of every row.
    std::vector<Regime> regimes;
};

/// Target "value" plus a categorical "regime_hint" covariate.
SyntheticSeries generate_synthetic(const SyntheticSpec& spec);

}  // namespace regimecast
