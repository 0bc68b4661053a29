#include "regimecast/featurizer/features.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

using Window = std::span<const double>;

double mean_of(Window x) { return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size()); }

/// Population variance.
double variance_of(Window x) {
    const double mu = mean_of(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - mu) * (v - mu);
    }
    return ss / static_cast<double>(x.size());
}

/// Linear-interpolation quantile over the sorted window (R type 7).
double quantile_of(Window x, double q) {
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double central_moment(Window x, int order) {
    const double mu = mean_of(x);
    double acc = 0.0;
    for (double v : x) {
        acc += std::pow(v - mu, order);
    }
    return acc / static_cast<double>(x.size());
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = kMissing;
};

/// Least-squares line against the index 0..n-1.
LineFit fit_line(Window x) {
    const double n = static_cast<double>(x.size());
    const double t_mean = (n - 1.0) / 2.0;
    const double x_mean = mean_of(x);
    double stt = 0.0;
    double stx = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dt = static_cast<double>(i) - t_mean;
        stt += dt * dt;
        stx += dt * (x[i] - x_mean);
        sxx += (x[i] - x_mean) * (x[i] - x_mean);
    }
    LineFit fit;
    fit.slope = stx / stt;
    fit.intercept = x_mean - fit.slope * t_mean;
    if (sxx > 0.0) {
        fit.r2 = (stx * stx) / (stt * sxx);
    }
    return fit;
}

/// Lag-k autocorrelation normalized by (n - k) * variance.
double autocorrelation(Window x, std::size_t lag) {
    if (lag >= x.size()) {
        return kMissing;
    }
    const double var = variance_of(x);
    if (!(var > 0.0)) {
        return kMissing;
    }
    const double mu = mean_of(x);
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < x.size(); ++t) {
        acc += (x[t] - mu) * (x[t + lag] - mu);
    }
    return acc / (static_cast<double>(x.size() - lag) * var);
}

double longest_strike(Window x, bool above) {
    const double mu = mean_of(x);
    std::size_t best = 0;
    std::size_t run = 0;
    for (double v : x) {
        const bool hit = above ? v > mu : v < mu;
        run = hit ? run + 1 : 0;
        best = std::max(best, run);
    }
    return static_cast<double>(best);
}

double ratio_beyond_sigma(Window x, double r) {
    const double mu = mean_of(x);
    const double sd = std::sqrt(variance_of(x));
    const auto count = std::count_if(x.begin(), x.end(), [&](double v) { return std::abs(v - mu) > r * sd; });
    return static_cast<double>(count) / static_cast<double>(x.size());
}

std::vector<CatalogEntry> build_entries() {
    std::vector<CatalogEntry> e;
    auto add = [&e](std::string name, Statistic fn) { e.push_back({std::move(name), std::move(fn)}); };

    add("mean", [](Window x) { return mean_of(x); });
    add("median", [](Window x) { return quantile_of(x, 0.5); });
    add("std_dev", [](Window x) { return std::sqrt(variance_of(x)); });
    add("variance", [](Window x) { return variance_of(x); });
    add("minimum", [](Window x) { return *std::min_element(x.begin(), x.end()); });
    add("maximum", [](Window x) { return *std::max_element(x.begin(), x.end()); });
    add("range", [](Window x) {
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        return *hi - *lo;
    });
    add("sum", [](Window x) { return std::accumulate(x.begin(), x.end(), 0.0); });
    add("abs_energy", [](Window x) { return std::inner_product(x.begin(), x.end(), x.begin(), 0.0); });
    add("mean_abs_change", [](Window x) {
        double acc = 0.0;
        for (std::size_t i = 1; i < x.size(); ++i) {
            acc += std::abs(x[i] - x[i - 1]);
        }
        return acc / static_cast<double>(x.size() - 1);
    });
    add("mean_change", [](Window x) { return (x.back() - x.front()) / static_cast<double>(x.size() - 1); });
    add("skewness", [](Window x) {
        const double m2 = central_moment(x, 2);
        return m2 > 0.0 ? central_moment(x, 3) / std::pow(m2, 1.5) : kMissing;
    });
    add("kurtosis", [](Window x) {
        const double m2 = central_moment(x, 2);
        return m2 > 0.0 ? central_moment(x, 4) / (m2 * m2) - 3.0 : kMissing;
    });
    add("quantile_0.1", [](Window x) { return quantile_of(x, 0.1); });
    add("quantile_0.25", [](Window x) { return quantile_of(x, 0.25); });
    add("quantile_0.75", [](Window x) { return quantile_of(x, 0.75); });
    add("quantile_0.9", [](Window x) { return quantile_of(x, 0.9); });
    add("iqr", [](Window x) { return quantile_of(x, 0.75) - quantile_of(x, 0.25); });
    add("count_above_mean", [](Window x) {
        const double mu = mean_of(x);
        return static_cast<double>(std::count_if(x.begin(), x.end(), [mu](double v) { return v > mu; }));
    });
    add("count_below_mean", [](Window x) {
        const double mu = mean_of(x);
        return static_cast<double>(std::count_if(x.begin(), x.end(), [mu](double v) { return v < mu; }));
    });
    add("longest_strike_above_mean", [](Window x) { return longest_strike(x, true); });
    add("longest_strike_below_mean", [](Window x) { return longest_strike(x, false); });
    add("number_of_peaks", [](Window x) {
        std::size_t peaks = 0;
        for (std::size_t i = 1; i + 1 < x.size(); ++i) {
            if (x[i] > x[i - 1] && x[i] > x[i + 1]) {
                ++peaks;
            }
        }
        return static_cast<double>(peaks);
    });
    add("number_of_zero_crossings", [](Window x) {
        const double mu = mean_of(x);
        std::size_t crossings = 0;
        for (std::size_t i = 1; i < x.size(); ++i) {
            if ((x[i - 1] - mu) * (x[i] - mu) < 0.0) {
                ++crossings;
            }
        }
        return static_cast<double>(crossings);
    });
    add("first_value", [](Window x) { return x.front(); });
    add("last_value", [](Window x) { return x.back(); });
    add("linear_trend_slope", [](Window x) { return fit_line(x).slope; });
    add("linear_trend_intercept", [](Window x) { return fit_line(x).intercept; });
    add("linear_trend_r2", [](Window x) { return fit_line(x).r2; });
    for (std::size_t lag : {1, 2, 3, 7}) {
        add("autocorrelation_lag" + std::to_string(lag), [lag](Window x) { return autocorrelation(x, lag); });
    }
    add("partial_sum_ratio", [](Window x) {
        const std::size_t quarter = std::max<std::size_t>(1, x.size() / 4);
        const double total = std::accumulate(x.begin(), x.end(), 0.0);
        const double tail = std::accumulate(x.end() - static_cast<std::ptrdiff_t>(quarter), x.end(), 0.0);
        const double scale = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
        return std::abs(total) > 1e-9 * std::sqrt(scale) + 1e-300 ? tail / total : kMissing;
    });
    add("binned_entropy", [](Window x) {
        constexpr std::size_t kBins = 10;
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        const double width = (*hi - *lo) / static_cast<double>(kBins);
        std::vector<std::size_t> counts(kBins, 0);
        for (double v : x) {
            std::size_t bin = width > 0.0 ? static_cast<std::size_t>((v - *lo) / width) : 0;
            counts[std::min(bin, kBins - 1)]++;
        }
        double h = 0.0;
        for (std::size_t c : counts) {
            if (c > 0) {
                const double p = static_cast<double>(c) / static_cast<double>(x.size());
                h -= p * std::log(p);
            }
        }
        return h;
    });
    add("mean_second_derivative_central", [](Window x) {
        if (x.size() < 3) {
            return kMissing;
        }
        double acc = 0.0;
        for (std::size_t i = 1; i + 1 < x.size(); ++i) {
            acc += 0.5 * (x[i + 1] - 2.0 * x[i] + x[i - 1]);
        }
        return acc / static_cast<double>(x.size() - 2);
    });
    add("ratio_beyond_1_sigma", [](Window x) { return ratio_beyond_sigma(x, 1.0); });
    add("ratio_beyond_2_sigma", [](Window x) { return ratio_beyond_sigma(x, 2.0); });
    add("coefficient_of_variation", [](Window x) {
        const double mu = mean_of(x);
        const double scale = *std::max_element(x.begin(), x.end(), [](double a, double b) {
            return std::abs(a) < std::abs(b);
        });
        if (std::abs(mu) <= 1e-9 * std::abs(scale) || mu == 0.0) {
            return kMissing;
        }
        return std::sqrt(variance_of(x)) / std::abs(mu);
    });
    add("median_abs_deviation", [](Window x) {
        const double med = quantile_of(x, 0.5);
        std::vector<double> dev(x.size());
        std::transform(x.begin(), x.end(), dev.begin(), [med](double v) { return std::abs(v - med); });
        return quantile_of(dev, 0.5);
    });
    return e;
}

}  // namespace

FeatureCatalog::FeatureCatalog(std::string version, std::vector<CatalogEntry> entries)
    : version_(std::move(version)), entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (const auto& entry : entries_) {
        if (!seen.insert(entry.name).second) {
            throw ConfigError("featurizer", "duplicate statistic name '" + entry.name + "' in catalog");
        }
    }
}

std::vector<std::string> FeatureCatalog::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& entry : entries_) {
        out.push_back(entry.name);
    }
    return out;
}

const FeatureCatalog& default_catalog() {
    static const FeatureCatalog catalog("window-stats-1", build_entries());
    return catalog;
}

std::vector<double> extract_features(std::span<const double> window, const FeatureCatalog& catalog) {
    if (window.size() < 2) {
        throw DataError("featurizer", "window of " + std::to_string(window.size()) +
                                          " points is too short for feature extraction (need >= 2)");
    }
    for (double v : window) {
        if (!std::isfinite(v)) {
            throw DataError("featurizer", "window contains a non-finite value");
        }
    }
    std::vector<double> row;
    row.reserve(catalog.size());
    for (const auto& entry : catalog.entries()) {
        const double value = entry.compute(window);
        row.push_back(std::isfinite(value) ? value : kMissing);
    }
    return row;
}

}  // namespace regimecast
