#include "regimecast/core/time_series.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

constexpr const char* kModule = "core_data";

bool parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > text.size()) {
        return false;
    }
    const char* first = text.data() + pos;
    const char* last = first + len;
    if (!std::all_of(first, last, [](char c) { return c >= '0' && c <= '9'; })) {
        return false;
    }
    const auto result = std::from_chars(first, last, out);
    return result.ec == std::errc{} && result.ptr == last;
}

std::chrono::year_month_day to_civil(Timestamp ts) {
    const auto days = std::chrono::floor<std::chrono::days>(std::chrono::sys_seconds{std::chrono::seconds{ts}});
    return std::chrono::year_month_day{days};
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

std::optional<double> parse_real(std::string_view text) {
    const std::string cleaned = trim(text);
    if (cleaned.empty()) {
        return std::nullopt;
    }
    double value = 0.0;
    const char* first = cleaned.data();
    const char* last = first + cleaned.size();
    if (*first == '+') {
        ++first;
    }
    const auto result = std::from_chars(first, last, value);
    if (result.ec != std::errc{} || result.ptr != last || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    const std::string s = trim(text);
    int y = 0;
    int mo = 0;
    int d = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-' || !parse_fixed_int(s, 0, 4, y) ||
        !parse_fixed_int(s, 5, 2, mo) || !parse_fixed_int(s, 8, 2, d)) {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    Timestamp seconds = std::chrono::sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
    if (s.size() == 10) {
        return seconds;
    }

    if (s[10] != 'T' && s[10] != ' ') {
        return std::nullopt;
    }
    int hh = 0;
    int mm = 0;
    int ss = 0;
    if (!parse_fixed_int(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' || !parse_fixed_int(s, 14, 2, mm)) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    if (pos < s.size() && s[pos] == ':') {
        if (!parse_fixed_int(s, pos + 1, 2, ss)) {
            return std::nullopt;
        }
        pos += 3;
    }
    if (pos < s.size() && s[pos] == 'Z') {
        ++pos;
    }
    if (pos != s.size() || hh > 23 || mm > 59 || ss > 59) {
        return std::nullopt;
    }
    return seconds + hh * 3600 + mm * 60 + ss;
}

std::string format_timestamp(Timestamp ts) {
    const auto ymd = to_civil(ts);
    const Timestamp day_start = std::chrono::sys_days{ymd}.time_since_epoch().count() * kSecondsPerDay;
    const Timestamp secs = ts - day_start;
    char buffer[64];
    if (secs == 0) {
        std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    } else {
        std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02lld:%02lld:%02lld", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60),
                      static_cast<long long>(secs % 60));
    }
    return buffer;
}

Covariate Covariate::make_numeric(std::string name, std::vector<double> values, Aggregation aggregation) {
    Covariate c;
    c.name = std::move(name);
    c.kind = CovariateKind::numeric;
    c.aggregation = aggregation;
    c.numeric = std::move(values);
    return c;
}

Covariate Covariate::make_categorical(std::string name, std::vector<std::string> values) {
    Covariate c;
    c.name = std::move(name);
    c.kind = CovariateKind::categorical;
    c.aggregation = Aggregation::mode;
    c.categorical = std::move(values);
    return c;
}

TimeSeries::TimeSeries(std::vector<Timestamp> timestamps, std::vector<double> target,
                       std::vector<Covariate> covariates, std::optional<Timestamp> step)
    : timestamps_(std::move(timestamps)), target_(std::move(target)), covariates_(std::move(covariates)) {
    if (target_.empty()) {
        throw DataError(kModule, "time series must contain at least one point");
    }
    if (timestamps_.size() != target_.size()) {
        throw DataError(kModule, "timestamp count " + std::to_string(timestamps_.size()) +
                                     " differs from target count " + std::to_string(target_.size()));
    }
    for (std::size_t i = 0; i < target_.size(); ++i) {
        if (!std::isfinite(target_[i])) {
            throw DataError(kModule, "non-finite target value at row " + std::to_string(i));
        }
    }
    if (timestamps_.size() >= 2) {
        step_ = timestamps_[1] - timestamps_[0];
        for (std::size_t i = 1; i < timestamps_.size(); ++i) {
            const Timestamp gap = timestamps_[i] - timestamps_[i - 1];
            if (gap == 0) {
                throw DataError(kModule, "duplicate timestamp " + format_timestamp(timestamps_[i]));
            }
            if (gap < 0) {
                throw DataError(kModule, "timestamps not increasing at " + format_timestamp(timestamps_[i]));
            }
            if (gap != step_) {
                throw DataError(kModule, "non-constant step: gap between " + format_timestamp(timestamps_[i - 1]) +
                                             " and " + format_timestamp(timestamps_[i]) + " is " +
                                             std::to_string(gap) + "s, expected " + std::to_string(step_) + "s");
            }
        }
        if (step.has_value() && *step != step_) {
            throw DataError(kModule, "declared step disagrees with timestamps");
        }
    } else {
        step_ = step.value_or(0);
    }

    std::set<std::string> names;
    for (const auto& c : covariates_) {
        if (c.name.empty()) {
            throw DataError(kModule, "covariate with empty name");
        }
        if (!names.insert(c.name).second) {
            throw DataError(kModule, "duplicate covariate name '" + c.name + "'");
        }
        if (c.size() != target_.size()) {
            throw DataError(kModule, "covariate '" + c.name + "' has " + std::to_string(c.size()) +
                                         " values, expected " + std::to_string(target_.size()));
        }
        if (c.kind == CovariateKind::numeric) {
            for (std::size_t i = 0; i < c.numeric.size(); ++i) {
                if (!std::isfinite(c.numeric[i])) {
                    throw DataError(kModule, "non-finite value in covariate '" + c.name + "' at row " +
                                                 std::to_string(i));
                }
            }
        } else {
            if (c.aggregation != Aggregation::mode) {
                throw DataError(kModule, "categorical covariate '" + c.name + "' must aggregate by mode");
            }
            for (std::size_t i = 0; i < c.categorical.size(); ++i) {
                if (c.categorical[i].empty()) {
                    throw DataError(kModule, "empty category in covariate '" + c.name + "' at row " +
                                                 std::to_string(i));
                }
            }
        }
    }
}

const Covariate* TimeSeries::find_covariate(std::string_view name) const {
    for (const auto& c : covariates_) {
        if (c.name == name) {
            return &c;
        }
    }
    return nullptr;
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > size()) {
        throw DataError(kModule, "invalid slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                                     ") of series with " + std::to_string(size()) + " points");
    }
    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(end);
    std::vector<Covariate> covs;
    covs.reserve(covariates_.size());
    for (const auto& c : covariates_) {
        Covariate part = c;
        if (c.kind == CovariateKind::numeric) {
            part.numeric.assign(c.numeric.begin() + b, c.numeric.begin() + e);
        } else {
            part.categorical.assign(c.categorical.begin() + b, c.categorical.begin() + e);
        }
        covs.push_back(std::move(part));
    }
    return TimeSeries({timestamps_.begin() + b, timestamps_.begin() + e}, {target_.begin() + b, target_.begin() + e},
                      std::move(covs), step_);
}

TimeSeries TimeSeries::tail(std::size_t count) const {
    count = std::min(count, size());
    return slice(size() - count, size());
}

TimeSeries TimeSeries::with_target(std::vector<double> target) const {
    return TimeSeries(timestamps_, std::move(target), covariates_, step_);
}

TimeSeries TimeSeries::with_covariate(Covariate column) const {
    auto covs = covariates_;
    covs.push_back(std::move(column));
    return TimeSeries(timestamps_, target_, std::move(covs), step_);
}

TimeSeries TimeSeries::appended(const TimeSeries& next) const {
    const Timestamp step = step_ != 0 ? step_ : next.step();
    if (step == 0 || next.timestamps_.front() != timestamps_.back() + step) {
        throw DataError(kModule, "appended points are not contiguous: expected " +
                                     format_timestamp(timestamps_.back() + step) + ", got " +
                                     format_timestamp(next.timestamps_.front()));
    }
    if (next.covariates_.size() != covariates_.size()) {
        throw DataError(kModule, "appended points carry a different covariate schema");
    }
    auto ts = timestamps_;
    ts.insert(ts.end(), next.timestamps_.begin(), next.timestamps_.end());
    auto target = target_;
    target.insert(target.end(), next.target_.begin(), next.target_.end());
    auto covs = covariates_;
    for (std::size_t i = 0; i < covs.size(); ++i) {
        const auto& other = next.covariates_[i];
        if (other.name != covs[i].name || other.kind != covs[i].kind) {
            throw DataError(kModule, "appended points carry a different covariate schema");
        }
        covs[i].numeric.insert(covs[i].numeric.end(), other.numeric.begin(), other.numeric.end());
        covs[i].categorical.insert(covs[i].categorical.end(), other.categorical.begin(), other.categorical.end());
    }
    return TimeSeries(std::move(ts), std::move(target), std::move(covs), step);
}

TimeSeries parse_csv(std::string_view text, const ColumnSchema& schema) {
    const auto records = csv::parse(text);
    if (records.empty()) {
        throw DataError(kModule, "CSV has no header row");
    }
    const auto& header = records.front();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!index.emplace(trim(header[i]), i).second) {
            throw DataError(kModule, "duplicate CSV column '" + header[i] + "'");
        }
    }
    auto column_of = [&](const std::string& name) {
        const auto it = index.find(name);
        if (it == index.end()) {
            throw DataError(kModule, "CSV is missing column '" + name + "'");
        }
        return it->second;
    };
    const std::size_t date_col = column_of(schema.date_column);
    const std::size_t target_col = column_of(schema.target_column);
    std::set<std::string> declared = {schema.date_column, schema.target_column};
    for (const auto& [name, kind] : schema.covariates) {
        if (!declared.insert(name).second) {
            throw DataError(kModule, "column '" + name + "' declared more than once");
        }
        column_of(name);
    }
    for (const auto& [name, col] : index) {
        if (!declared.contains(name)) {
            throw DataError(kModule, "CSV column '" + name + "' has no declared role");
        }
    }

    struct Row {
        Timestamp ts;
        std::size_t record;
    };
    std::vector<Row> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            throw DataError(kModule, "CSV line " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) +
                                         " fields, expected " + std::to_string(header.size()));
        }
        const auto ts = parse_timestamp(rec[date_col]);
        if (!ts) {
            throw DataError(kModule, "unparseable date '" + rec[date_col] + "' on CSV line " + std::to_string(r + 1));
        }
        rows.push_back({*ts, r});
    }
    if (rows.empty()) {
        throw DataError(kModule, "CSV has no data rows");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });

    std::vector<Timestamp> timestamps;
    std::vector<double> target;
    for (const auto& row : rows) {
        const auto& rec = records[row.record];
        const auto value = parse_real(rec[target_col]);
        if (!value) {
            throw DataError(kModule, "missing or unparseable target '" + rec[target_col] + "' on CSV line " +
                                         std::to_string(row.record + 1));
        }
        timestamps.push_back(row.ts);
        target.push_back(*value);
    }

    std::vector<Covariate> covariates;
    for (const auto& [name, kind] : schema.covariates) {
        const std::size_t col = index.at(name);
        if (kind == CovariateKind::numeric) {
            std::vector<double> values;
            for (const auto& row : rows) {
                const auto& cell = records[row.record][col];
                const auto value = parse_real(cell);
                if (!value) {
                    throw DataError(kModule, "unparseable number '" + cell + "' in column '" + name + "' on CSV line " +
                                                 std::to_string(row.record + 1));
                }
                values.push_back(*value);
            }
            covariates.push_back(Covariate::make_numeric(name, std::move(values)));
        } else {
            std::vector<std::string> values;
            for (const auto& row : rows) {
                std::string cell = trim(records[row.record][col]);
                values.push_back(cell.empty() ? std::string(kMissingCategory) : std::move(cell));
            }
            covariates.push_back(Covariate::make_categorical(name, std::move(values)));
        }
    }
    return TimeSeries(std::move(timestamps), std::move(target), std::move(covariates));
}

TimeSeries ingest_csv(const std::string& path, const ColumnSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(kModule, "cannot open data file '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_csv(buffer.str(), schema);
}

std::string to_csv(const TimeSeries& series, const ColumnSchema& schema) {
    std::string out;
    csv::Record header = {schema.date_column, schema.target_column};
    for (const auto& c : series.covariates()) {
        header.push_back(c.name);
    }
    out += csv::join(header) + "\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        csv::Record rec = {format_timestamp(series.timestamps()[i]), csv::format_double(series.target()[i])};
        for (const auto& c : series.covariates()) {
            rec.push_back(c.kind == CovariateKind::numeric ? csv::format_double(c.numeric[i]) : c.categorical[i]);
        }
        out += csv::join(rec) + "\n";
    }
    return out;
}

std::vector<double> StandardizationParams::apply(const std::vector<double>& xs) const {
    std::vector<double> out(xs.size());
    std::transform(xs.begin(), xs.end(), out.begin(), [this](double x) { return apply(x); });
    return out;
}

std::vector<double> StandardizationParams::invert(const std::vector<double>& zs) const {
    std::vector<double> out(zs.size());
    std::transform(zs.begin(), zs.end(), out.begin(), [this](double z) { return invert(z); });
    return out;
}

StandardizationParams fit_standardization(const std::vector<double>& values) {
    if (values.empty()) {
        throw DataError(kModule, "cannot standardize an empty sequence");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double std_dev = std::sqrt(ss / n);
    if (!(std_dev > 0.0)) {
        throw DataError(kModule, "constant target cannot be standardized (std-dev 0)");
    }
    return {mean, std_dev};
}

std::pair<TimeSeries, StandardizationParams> standardize(const TimeSeries& series) {
    const auto params = fit_standardization(series.target());
    return {series.with_target(params.apply(series.target())), params};
}

std::string_view to_string(DatePart part) {
    switch (part) {
        case DatePart::day: return "day";
        case DatePart::month: return "month";
        case DatePart::year: return "year";
        case DatePart::weekday: return "weekday";
    }
    return "";
}

std::optional<DatePart> date_part_from_string(std::string_view name) {
    for (auto part : {DatePart::day, DatePart::month, DatePart::year, DatePart::weekday}) {
        if (to_string(part) == name) {
            return part;
        }
    }
    return std::nullopt;
}

TimeSeries add_date_covariates(const TimeSeries& series, const std::set<DatePart>& parts) {
    if (parts.empty()) {
        throw DataError(kModule, "no date parts requested");
    }
    auto covs = series.covariates();
    for (auto part : parts) {
        const std::string name(to_string(part));
        if (series.find_covariate(name) != nullptr) {
            throw DataError(kModule, "date covariate '" + name + "' collides with an existing covariate");
        }
        std::vector<double> values;
        values.reserve(series.size());
        for (Timestamp ts : series.timestamps()) {
            const auto ymd = to_civil(ts);
            switch (part) {
                case DatePart::day: values.push_back(static_cast<unsigned>(ymd.day())); break;
                case DatePart::month: values.push_back(static_cast<unsigned>(ymd.month())); break;
                case DatePart::year: values.push_back(static_cast<int>(ymd.year())); break;
                case DatePart::weekday:
                    values.push_back(std::chrono::weekday{std::chrono::sys_days{ymd}}.iso_encoding() - 1);
                    break;
            }
        }
        covs.push_back(Covariate::make_numeric(name, std::move(values), Aggregation::last));
    }
    return TimeSeries(series.timestamps(), series.target(), std::move(covs), series.step());
}

SplitPlan plan_splits(std::size_t length, std::size_t n, std::size_t m, std::optional<std::size_t> requested_splits,
                      std::size_t stride) {
    if (n < 2 || m < 1) {
        throw ConfigError(kModule, "split sizes require n >= 2 and m >= 1");
    }
    if (stride < 1) {
        throw ConfigError(kModule, "stride must be >= 1");
    }
    if (n + m > length) {
        throw DataError(kModule, "n + m = " + std::to_string(n + m) + " exceeds series length " +
                                     std::to_string(length));
    }
    const std::size_t max_splits = (length - n - m) / stride + 1;
    std::size_t first = 0;
    std::size_t count = max_splits;
    if (requested_splits.has_value()) {
        if (*requested_splits == 0 || *requested_splits > max_splits) {
            throw ConfigError(kModule, "requested " + std::to_string(*requested_splits) + " splits, maximum is " +
                                           std::to_string(max_splits));
        }
        count = *requested_splits;
        first = max_splits - count;
    }
    SplitPlan plan{n, m, stride, {}};
    plan.splits.reserve(count);
    for (std::size_t k = first; k < first + count; ++k) {
        const std::size_t begin = k * stride;
        plan.splits.push_back({begin, begin + n, begin + n + m});
    }
    return plan;
}

}  // namespace regimecast
