#include "regimecast/drift/drift.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "regimecast/core/error.hpp"

namespace regimecast {

double ks_statistic(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) {
        throw DataError("drift", "ks_statistic needs two non-empty samples");
    }
    std::vector<double> sa(a.begin(), a.end());
    std::vector<double> sb(b.begin(), b.end());
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    const auto na = static_cast<double>(sa.size());
    const auto nb = static_cast<double>(sb.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double best = 0.0;
    while (i < sa.size() && j < sb.size()) {
        const double u = std::min(sa[i], sb[j]);
        while (i < sa.size() && sa[i] == u) {
            ++i;
        }
        while (j < sb.size() && sb[j] == u) {
            ++j;
        }
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

void KswinParams::validate() const {
    if (sample < 2 || 2 * sample > window) {
        throw ConfigError("drift", "kswin sample must satisfy 2 <= sample <= window / 2");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("drift", "kswin alpha must be in (0, 1)");
    }
}

double KswinParams::threshold() const {
    return std::sqrt(-std::log(alpha) / static_cast<double>(sample)) * std::sqrt(2.0);
}

Kswin::Kswin(KswinParams params) : params_(params), threshold_(0.0), rng_(params.seed) {
    params_.validate();
    threshold_ = params_.threshold();
}

std::optional<DriftEvent> Kswin::update(double value, Timestamp timestamp) {
    if (!std::isfinite(value)) {
        throw DataError("drift", "kswin received a non-finite value");
    }
    buffer_.push_back(value);
    if (buffer_.size() > params_.window) {
        buffer_.pop_front();
    }
    if (buffer_.size() < params_.window) {
        return std::nullopt;
    }
    const std::size_t r = params_.sample;
    const std::size_t reference_size = params_.window - r;
    std::vector<double> recent(buffer_.end() - static_cast<std::ptrdiff_t>(r), buffer_.end());
    std::vector<double> reference;
    reference.reserve(r);
    for (std::size_t idx : rng_.sample_without_replacement(reference_size, r)) {
        reference.push_back(buffer_[idx]);
    }
    const double d = ks_statistic(recent, reference);
    if (d <= threshold_) {
        return std::nullopt;
    }
    buffer_.assign(recent.begin(), recent.end());
    return DriftEvent{timestamp, "kswin", d, threshold_};
}

void AdwinParams::validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
        throw ConfigError("drift", "adwin delta must be in (0, 1)");
    }
    if (clock < 1) {
        throw ConfigError("drift", "adwin clock must be >= 1");
    }
}

Adwin::Adwin(AdwinParams params) : params_(params) { params_.validate(); }

std::optional<DriftEvent> Adwin::update(double value, Timestamp timestamp) {
    if (!std::isfinite(value)) {
        throw DataError("drift", "adwin received a non-finite value");
    }
    window_.push_back(value);
    ++ticks_;
    if (ticks_ % params_.clock != 0) {
        return std::nullopt;
    }

    std::optional<DriftEvent> event;
    const double floor = static_cast<double>(params_.min_window);
    bool cut = true;
    while (cut) {
        cut = false;
        const std::size_t n = window_.size();
        if (n <= 2 * (params_.min_window + 1)) {
            break;
        }
        double total = 0.0;
        for (double v : window_) {
            total += v;
        }
        const double mean = total / static_cast<double>(n);
        double ss = 0.0;
        for (double v : window_) {
            ss += (v - mean) * (v - mean);
        }
        const double variance = ss / static_cast<double>(n);
        const double dd = std::log(2.0 * std::log(static_cast<double>(n)) / params_.delta);

        double head = 0.0;
        for (std::size_t n0 = 1; n0 < n; ++n0) {
            head += window_[n0 - 1];
            const std::size_t n1 = n - n0;
            if (n0 <= params_.min_window + 1 || n1 <= params_.min_window + 1) {
                continue;
            }
            const double m = 1.0 / (static_cast<double>(n0) - floor + 1.0) +
                             1.0 / (static_cast<double>(n1) - floor + 1.0);
            const double eps = std::sqrt(2.0 * m * variance * dd) + 2.0 / 3.0 * dd * m;
            const double gap = std::abs(head / static_cast<double>(n0) - (total - head) / static_cast<double>(n1));
            if (gap > eps) {
                if (!event) {
                    event = DriftEvent{timestamp, "adwin", gap, eps};
                }
                window_.pop_front();
                cut = true;
                break;
            }
        }
    }
    return event;
}

std::unique_ptr<DriftDetector> make_detector(const DriftConfig& config) {
    if (config.detector == DetectorKind::adwin) {
        return std::make_unique<Adwin>(config.adwin);
    }
    return std::make_unique<Kswin>(config.kswin);
}

bool guard_allows(const RetrainGuard& guard, Timestamp now) {
    if (guard.min_interval < 0) {
        throw ConfigError("drift", "retrain interval must be >= 0");
    }
    if (!guard.last_retrain) {
        return true;
    }
    if (now < *guard.last_retrain) {
        throw DataError("drift", "timestamp " + format_timestamp(now) + " precedes last retrain " +
                                     format_timestamp(*guard.last_retrain));
    }
    return now - *guard.last_retrain >= guard.min_interval;
}

nlohmann::json to_json(const DriftEvent& event, bool retrain_allowed) {
    return {{"timestamp", format_timestamp(event.timestamp)},
            {"detector", event.detector},
            {"statistic", event.statistic},
            {"threshold", event.threshold},
            {"retrain_allowed", retrain_allowed}};
}

}  // namespace regimecast
