#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "regimecast/core/random.hpp"
#include "regimecast/core/time_series.hpp"

namespace regimecast {

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b| by a merge scan
/// over the sorted samples. Throws DataError on an empty sample.
double ks_statistic(std::span<const double> a, std::span<const double> b);

struct DriftEvent {
    Timestamp timestamp = 0;
    std::string detector;
    double statistic = 0.0;
    double threshold = 0.0;
};

/// Sequential single-writer detector over a value stream.
class DriftDetector {
public:
    virtual ~DriftDetector() = default;
    virtual std::optional<DriftEvent> update(double value, Timestamp timestamp) = 0;
    [[nodiscard]] virtual std::string_view name() const = 0;
    [[nodiscard]] virtual std::unique_ptr<DriftDetector> clone() const = 0;
};

struct KswinParams {
    std::size_t window = 100;
    std::size_t sample = 30;
    double alpha = 0.005;
    std::uint64_t seed = 0;

    void validate() const;
    /// sqrt(-ln(alpha) / sample) * sqrt(2).
    [[nodiscard]] double threshold() const;
};

/// Compares the newest `sample` values against an equal-size draw without
/// replacement from the older part of a full window. On firing the window
/// keeps only the newest `sample` values.
class Kswin final : public DriftDetector {
public:
    explicit Kswin(KswinParams params);

    std::optional<DriftEvent> update(double value, Timestamp timestamp) override;
    [[nodiscard]] std::string_view name() const override { return "kswin"; }
    [[nodiscard]] std::unique_ptr<DriftDetector> clone() const override { return std::make_unique<Kswin>(*this); }

    [[nodiscard]] std::size_t buffered() const { return buffer_.size(); }
    [[nodiscard]] const KswinParams& params() const { return params_; }

private:
    KswinParams params_;
    double threshold_;
    std::deque<double> buffer_;
    Rng rng_;
};

struct AdwinParams {
    double delta = 0.002;
    /// Cut points are tested every `clock` updates.
    std::size_t clock = 32;
    /// Each sub-window needs more than min_window + 1 points.
    std::size_t min_window = 5;

    void validate() const;
};

/// Adaptive windowing: the window shrinks from its old end while any split
/// into old/new halves shows a mean difference above
///   eps = sqrt(2 m v dd) + 2/3 dd m,  dd = ln(2 ln(n) / delta),
///   m = 1/(n0 - min_window + 1) + 1/(n1 - min_window + 1),
/// with v the window variance. Keeps the exact window, not a bucket sketch.
class Adwin final : public DriftDetector {
public:
    explicit Adwin(AdwinParams params);

    std::optional<DriftEvent> update(double value, Timestamp timestamp) override;
    [[nodiscard]] std::string_view name() const override { return "adwin"; }
    [[nodiscard]] std::unique_ptr<DriftDetector> clone() const override { return std::make_unique<Adwin>(*this); }

    [[nodiscard]] std::size_t width() const { return window_.size(); }

private:
    AdwinParams params_;
    std::deque<double> window_;
    std::size_t ticks_ = 0;
};

enum class DetectorKind { kswin, adwin };

struct DriftConfig {
    DetectorKind detector = DetectorKind::kswin;
    KswinParams kswin;
    AdwinParams adwin;
    /// Minimum spacing of retrains, in timestamp units.
    Timestamp min_interval = 14 * kSecondsPerDay;
};

std::unique_ptr<DriftDetector> make_detector(const DriftConfig& config);

/// Minimum elapsed time between retrains.
struct RetrainGuard {
    Timestamp min_interval = 0;
    std::optional<Timestamp> last_retrain;
};

/// True iff no retrain happened yet or now - last >= min_interval. Throws
/// DataError when `now` precedes the last retrain.
bool guard_allows(const RetrainGuard& guard, Timestamp now);

/// One JSON-lines record.
nlohmann::json to_json(const DriftEvent& event, bool retrain_allowed);

}  // namespace regimecast
