#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace regimecast {

/// Sentinel for a statistic that is undefined on a window (e.g. the
/// autocorrelation of a constant window). Missing values feed the null
/// filter of the reduction cascade; they are never replaced by zeros.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double value) { return std::isnan(value); }

using Statistic = std::function<double(std::span<const double>)>;

struct CatalogEntry {
    std::string name;
    Statistic compute;
};

/// Ordered, versioned list of window statistics. Saved models record the
/// version and refuse rows produced by a different catalog.
class FeatureCatalog {
public:
    FeatureCatalog(std::string version, std::vector<CatalogEntry> entries);

    [[nodiscard]] const std::string& version() const { return version_; }
    [[nodiscard]] const std::vector<CatalogEntry>& entries() const { return entries_; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] std::vector<std::string> names() const;

private:
    std::string version_;
    std::vector<CatalogEntry> entries_;
};

/// The fixed 40-statistic catalog (version "window-stats-1").
const FeatureCatalog& default_catalog();

/// One value per catalog entry, in catalog order. Non-finite results are
/// reported as kMissing. Requires at least 2 finite values.
std::vector<double> extract_features(std::span<const double> window, const FeatureCatalog& catalog);

}  // namespace regimecast
