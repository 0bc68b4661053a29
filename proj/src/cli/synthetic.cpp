#include "regimecast/cli/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "regimecast/core/error.hpp"
#include "regimecast/core/random.hpp"

namespace regimecast {

std::string_view to_string(Regime regime) {
    switch (regime) {
        case Regime::sinusoid:
            return "sinusoid";
        case Regime::trend:
            return "trend";
        case Regime::burst:
            return "burst";
    }
    return "sinusoid";
}

SyntheticSeries generate_synthetic(const SyntheticSpec& spec) {
    if (spec.segments < 1 || spec.segment_length < 2 || spec.period < 2) {
        throw ConfigError("cli", "synthetic spec needs segments >= 1, segment_length >= 2, period >= 2");
    }
    const auto start = parse_timestamp(spec.start_date);
    if (!start) {
        throw ConfigError("cli", "bad synthetic start_date '" + spec.start_date + "'");
    }
    Rng rng(spec.seed);
    const std::size_t total = spec.segments * spec.segment_length;
    std::vector<Timestamp> timestamps(total);
    std::vector<double> values(total);
    std::vector<std::string> hints(total);
    std::vector<Regime> regimes(total);
    constexpr Regime cycle[] = {Regime::sinusoid, Regime::trend, Regime::burst};

    // One period tabulated once so noise-free segments repeat exactly.
    std::vector<double> pattern(static_cast<std::size_t>(spec.period));
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        pattern[i] = spec.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                                               static_cast<double>(spec.period));
    }

    double level = spec.base_level;
    int direction = 1;
    for (std::size_t seg = 0; seg < spec.segments; ++seg) {
        const Regime regime = cycle[seg % 3];
        for (std::size_t k = 0; k < spec.segment_length; ++k) {
            const std::size_t t = seg * spec.segment_length + k;
            timestamps[t] = *start + static_cast<Timestamp>(t) * kSecondsPerDay;
            regimes[t] = regime;
            switch (regime) {
                case Regime::sinusoid:
                    values[t] = level + pattern[t % pattern.size()];
                    if (spec.sinusoid_noise > 0.0) {
                        values[t] += rng.normal(0.0, spec.sinusoid_noise);
                    }
                    break;
                case Regime::trend:
                    values[t] = level + direction * spec.trend_slope * static_cast<double>(k + 1) +
                                rng.normal(0.0, spec.trend_noise);
                    break;
                case Regime::burst:
                    values[t] = level + rng.normal(0.0, spec.burst_noise);
                    break;
            }
            hints[t] = std::string(to_string(regime));
            if (rng.uniform() < spec.hint_noise) {
                hints[t] = std::string(to_string(cycle[rng.uniform_index(3)]));
            }
        }
        if (regime == Regime::trend) {
            level += direction * spec.trend_slope * static_cast<double>(spec.segment_length);
            direction = -direction;
        }
    }
    return {TimeSeries(std::move(timestamps), std::move(values),
                       {Covariate::make_categorical("regime_hint", std::move(hints))}),
            std::move(regimes)};
}

}  // namespace regimecast
