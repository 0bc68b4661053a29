#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "regimecast/cli/synthetic.hpp"
#include "regimecast/core/error.hpp"
#include "regimecast/core/random.hpp"
#include "regimecast/ensemble/ensemble.hpp"
#include "regimecast/ensemble/training_table.hpp"

namespace regimecast {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TimeSeries daily(const std::vector<double>& target, std::vector<Covariate> covariates = {}) {
    std::vector<Timestamp> ts;
    for (std::size_t i = 0; i < target.size(); ++i) ts.push_back(static_cast<Timestamp>(i) * kSecondsPerDay);
    return TimeSeries(ts, target, std::move(covariates));
}

PredictorSpec spec_of(const std::string& id) {
    for (const auto& s : default_models_db(7)) {
        if (s.id == id) return s;
    }
    throw std::runtime_error("no spec " + id);
}

std::vector<PredictorSpec> named_pool(std::size_t size) {
    std::vector<PredictorSpec> pool;
    for (std::size_t i = 0; i < size; ++i) {
        auto spec = spec_of("drift");
        spec.id = "p" + std::to_string(i);
        pool.push_back(spec);
    }
    return pool;
}

std::map<std::string, double> encode(const CovariateEncoder& encoder, const TimeSeries& s, std::size_t b,
                                     std::size_t e, std::vector<std::string>* unseen = nullptr) {
    const auto names = encoder.output_names();
    const auto values = encoder.aggregate(s, b, e, unseen);
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < names.size(); ++i) out[names[i]] = values.at(i);
    return out;
}

EnsembleConfig small_config() {
    EnsembleConfig config;
    config.pool = default_models_db(7);
    config.rulefit.n_trees = 20;
    config.rulefit.seed = 3;
    return config;
}

const SyntheticSeries& regime_data() {
    static const SyntheticSeries data = [] {
        SyntheticSpec spec;
        spec.segments = 3;
        return generate_synthetic(spec);
    }();
    return data;
}

const EnsembleModel& regime_model() {
    static const EnsembleModel model = train_ensemble(regime_data().series, small_config());
    return model;
}

TEST(LabelTest, LowerErrorWinsAndTiesGoEarlier) {
    const std::vector<double> train{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
    const std::vector<double> actual{15, 16};
    const std::vector<PredictorSpec> pool{spec_of("drift"), spec_of("seasonal_naive")};
    const auto scores = score_pool(train, actual, pool, Metric::mae);
    EXPECT_EQ(scores[0], 0.0);
    EXPECT_GT(scores[1], 0.0);
    EXPECT_EQ(label_best_model(train, actual, pool, Metric::mae), "drift");

    EXPECT_EQ(best_index(std::vector<double>{0.0, 1.0}), 0u);
    EXPECT_EQ(best_index(std::vector<double>{1.0, 1.0}), 0u);
    EXPECT_EQ(best_index(std::vector<double>{kNaN, 2.0, 1.0}), 2u);
    EXPECT_FALSE(best_index(std::vector<double>{kNaN, kNaN}).has_value());
}

TEST(CovariateEncoderTest, WorkedExamples) {
    const auto s = daily({1, 2, 3, 4},
                         {Covariate::make_numeric("promo", {1, 2, 3, 9}),
                          Covariate::make_categorical("store", {"A", "A", "B", "C"}),
                          Covariate::make_numeric("weekday", {4, 5, 6, 0}, Aggregation::last)});
    const auto encoder = CovariateEncoder::fit(s, 0, 3);
    EXPECT_EQ(encoder.output_names(), (std::vector<std::string>{"promo", "store=A", "store=B", "weekday"}));

    auto row = encode(encoder, s, 0, 3);
    EXPECT_EQ(row["promo"], 6.0);
    EXPECT_EQ(row["store=A"], 1.0);
    EXPECT_EQ(row["store=B"], 0.0);
    EXPECT_EQ(row["weekday"], 6.0);

    row = encode(encoder, s, 1, 3);
    EXPECT_EQ(row["store=A"], 1.0) << "tie goes to the smaller category";
    EXPECT_EQ(row["store=B"], 0.0);

    std::vector<std::string> unseen;
    row = encode(encoder, s, 3, 4, &unseen);
    EXPECT_EQ(row["store=A"], 0.0);
    EXPECT_EQ(row["store=B"], 0.0);
    EXPECT_EQ(unseen, (std::vector<std::string>{"store=C"}));

    EXPECT_EQ(modal_category(std::vector<std::string>{"b", "a", "b", "a"}), "a");
    const auto back = covariate_encoder_from_json(to_json(encoder));
    EXPECT_EQ(to_json(back), to_json(encoder));
}

TEST(CombineTest, WorkedExamples) {
    const std::vector<std::string> ids{"a", "b"};
    const std::vector<Forecast> f{{{10, 20}, "a"}, {{20, 20}, "b"}};
    const auto c = combine(std::vector<double>{0.5, 0.5}, ids, f);
    EXPECT_EQ(c.values, (std::vector<double>{15, 20}));

    const auto w = restrict_top_k(std::vector<double>{0.5, 0.3, 0.2}, 2);
    EXPECT_NEAR(w[0], 0.625, 1e-15);
    EXPECT_NEAR(w[1], 0.375, 1e-15);
    EXPECT_EQ(w[2], 0.0);

    const std::vector<double> p{0.2, 0.5, 0.3};
    EXPECT_EQ(restrict_top_k(p, 3), p);
    EXPECT_EQ(restrict_top_k(p, 10), p);
    EXPECT_EQ(restrict_top_k(p, std::nullopt), p);
    EXPECT_EQ(restrict_top_k(std::vector<double>{0.4, 0.4, 0.2}, 1), (std::vector<double>{1, 0, 0}));
}

TEST(CombineTest, OneHotConvexityAndShiftProperty) {
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 1 + rng.uniform_index(6);
        const std::size_t h = 1 + rng.uniform_index(10);
        std::vector<std::string> ids;
        std::vector<Forecast> forecasts;
        std::vector<double> probs(k);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            ids.push_back("m" + std::to_string(i));
            Forecast f{std::vector<double>(h), ids.back()};
            for (auto& v : f.values) v = rng.normal(0.0, 100.0);
            forecasts.push_back(f);
            probs[i] = rng.uniform();
            total += probs[i];
        }
        for (auto& p : probs) p /= total;

        const std::size_t hot = rng.uniform_index(k);
        std::vector<double> one_hot(k, 0.0);
        one_hot[hot] = 1.0;
        EXPECT_EQ(combine(one_hot, ids, forecasts).values, forecasts[hot].values);

        const auto c = combine(probs, ids, forecasts);
        const double shift = rng.normal(0.0, 50.0);
        auto shifted = forecasts;
        for (auto& f : shifted) {
            for (auto& v : f.values) v += shift;
        }
        const auto cs = combine(probs, ids, shifted);
        for (std::size_t t = 0; t < h; ++t) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& f : forecasts) {
                lo = std::min(lo, f.values[t]);
                hi = std::max(hi, f.values[t]);
            }
            EXPECT_GE(c.values[t], lo - 1e-9);
            EXPECT_LE(c.values[t], hi + 1e-9);
            EXPECT_NEAR(cs.values[t], c.values[t] + shift, 1e-9 * (1.0 + std::abs(shift) + std::abs(c.values[t])));
        }
    }
}

TrainingTable table_from_scores(const std::vector<std::vector<double>>& scores, const std::vector<PredictorSpec>& pool) {
    TrainingTable table;
    table.columns = {"x"};
    table.values = Matrix(scores.size(), 1);
    for (std::size_t r = 0; r < scores.size(); ++r) {
        table.values(r, 0) = static_cast<double>(r);
        table.labels.push_back(pool[*best_index(scores[r])].id);
        table.row_timestamps.push_back(static_cast<Timestamp>(r) * kSecondsPerDay);
    }
    table.scores = scores;
    for (const auto& s : pool) table.score_ids.push_back(s.id);
    return table;
}

TEST(DiscardRuleTest, SingleWinRemovedTwoWinsKept) {
    const auto pool = named_pool(3);
    // p0 wins five rows, p1 two, p2 one; p2's row goes to p1 on its second-best score.
    std::vector<std::vector<double>> scores(8, {0.0, 1.0, 2.0});
    scores[5] = scores[6] = {1.0, 0.0, 2.0};
    scores[7] = {3.0, 1.0, 0.0};
    const auto result = apply_discard_rule(table_from_scores(scores, pool), pool);
    EXPECT_EQ(result.discarded, (std::vector<std::string>{"p2"}));
    ASSERT_EQ(result.pool.size(), 2u);
    EXPECT_EQ(result.table.labels[7], "p1");
    EXPECT_EQ(result.table.label_histogram(), (std::map<std::string, std::size_t>{{"p0", 5}, {"p1", 3}}));
    EXPECT_EQ(result.table.labels.size(), 8u);
}

TEST(DiscardRuleTest, RowsWithoutSurvivingScoreDropped) {
    const auto pool = named_pool(3);
    std::vector<std::vector<double>> scores(6, {0.0, 1.0, kNaN});
    scores[2] = scores[3] = {1.0, 0.0, kNaN};
    scores[5] = {kNaN, kNaN, 0.0};
    const auto result = apply_discard_rule(table_from_scores(scores, pool), pool);
    EXPECT_EQ(result.discarded, (std::vector<std::string>{"p2"}));
    EXPECT_EQ(result.table.labels.size(), 5u);
    EXPECT_EQ(result.table.values.rows(), 5u);
    EXPECT_EQ(result.table.skipped_rows, 1u);
}

TEST(DiscardRuleTest, EmptyPoolIsInfeasible) {
    const auto pool = named_pool(2);
    const std::vector<std::vector<double>> scores{{0.0, 1.0}, {1.0, 0.0}};
    EXPECT_THROW(apply_discard_rule(table_from_scores(scores, pool), pool), InfeasibleError);
}

// Recomputes every label from the stored scores against the current pool and
// removes all predictors with at most one win until nothing changes.
struct OracleOutcome {
    std::set<std::string> survivors;
    std::vector<std::string> labels;
    bool infeasible = false;
};

OracleOutcome discard_oracle(const std::vector<std::vector<double>>& scores, const std::vector<PredictorSpec>& pool) {
    std::set<std::size_t> alive;
    for (std::size_t i = 0; i < pool.size(); ++i) alive.insert(i);
    while (true) {
        std::vector<std::string> labels;
        std::map<std::size_t, std::size_t> wins;
        for (const auto& row : scores) {
            std::optional<std::size_t> best;
            for (std::size_t i : alive) {
                if (!std::isnan(row[i]) && (!best || row[i] < row[*best])) best = i;
            }
            if (best) {
                ++wins[*best];
                labels.push_back(pool[*best].id);
            }
        }
        std::set<std::size_t> losers;
        for (std::size_t i : alive) {
            if (wins[i] <= 1) losers.insert(i);
        }
        if (losers.empty()) {
            OracleOutcome out;
            for (std::size_t i : alive) out.survivors.insert(pool[i].id);
            out.labels = labels;
            return out;
        }
        if (losers.size() == alive.size()) return {{}, {}, true};
        for (std::size_t i : losers) alive.erase(i);
    }
}

TEST(DiscardRuleTest, MatchesSimultaneousRemovalOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        const auto pool = named_pool(2 + rng.uniform_index(5));
        std::vector<std::vector<double>> scores(3 + rng.uniform_index(30));
        for (auto& row : scores) {
            row.resize(pool.size());
            for (auto& v : row) v = rng.uniform() < 0.15 ? kNaN : std::round(rng.uniform() * 5.0);
            if (std::all_of(row.begin(), row.end(), [](double v) { return std::isnan(v); })) row[0] = 1.0;
        }
        const auto expected = discard_oracle(scores, pool);
        const auto table = table_from_scores(scores, pool);
        if (expected.infeasible) {
            EXPECT_THROW(apply_discard_rule(table, pool), InfeasibleError);
            continue;
        }
        const auto result = apply_discard_rule(table, pool);
        std::set<std::string> survivors;
        for (const auto& s : result.pool) survivors.insert(s.id);
        EXPECT_EQ(survivors, expected.survivors);
        EXPECT_EQ(result.table.labels, expected.labels);
        EXPECT_EQ(result.discarded.size() + result.pool.size(), pool.size());
        EXPECT_LE(static_cast<std::size_t>(result.passes), pool.size());
        for (const auto& [id, count] : result.table.label_histogram()) EXPECT_GE(count, 2u) << id;
    }
}

TEST(TrainingTableTest, RegimeSeriesLabelsAndPartition) {
    const auto& data = regime_data();
    const auto [z, params] = standardize(data.series);
    const auto plan = plan_splits(data.series, 35, 7);
    const auto build = build_training_table(data.series, params, plan, default_models_db(7), default_catalog(),
                                            Metric::mae);
    const auto hist = build.table.label_histogram();
    EXPECT_GT(hist.count("seasonal_naive"), 0u);
    EXPECT_GE(hist.size(), 3u);
    EXPECT_EQ(build.table.labels.size() + build.table.skipped_rows, plan.splits.size());
    EXPECT_EQ(build.table.values.rows(), build.table.labels.size());
    EXPECT_EQ(build.table.values.cols(), build.table.columns.size());
    EXPECT_NE(std::find(build.table.columns.begin(), build.table.columns.end(), "regime_hint=sinusoid"),
              build.table.columns.end());
}

TEST(TrainingTableTest, LengthCapKeepsMostRecentSplits) {
    Rng rng(4);
    std::vector<double> y(107);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const double season = 5.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 7.0);
        y[t] = t < 70 ? 50.0 + season : 50.0 + 0.5 * static_cast<double>(t - 70) + rng.normal(0.0, 1.0);
    }
    const auto series = daily(y);
    const auto plan = plan_splits(series, 35, 7);
    ASSERT_EQ(plan.splits.size(), 66u);
    TableOptions options;
    options.length_cap = 50;
    const auto build = build_training_table(series, fit_standardization(y), plan, default_models_db(7),
                                            default_catalog(), Metric::mae, options);
    ASSERT_EQ(build.table.labels.size(), 50u);
    EXPECT_EQ(build.table.row_timestamps.front(), 50 * kSecondsPerDay);
    EXPECT_EQ(build.table.row_timestamps.back(), 99 * kSecondsPerDay);
}

TEST(EnsembleTest, PredictNextContract) {
    const auto& model = regime_model();
    const auto& series = regime_data().series;
    EXPECT_THROW(predict_next(model, series.slice(0, 34), 7), DataError);
    const auto a = predict_next(model, series.slice(0, 120), 7);
    const auto b = predict_next(model, series.slice(0, 120), 7);
    ASSERT_EQ(a.values.size(), 7u);
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.weights, b.weights);
    double sum = 0.0;
    for (double w : a.weights) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-9);
    EXPECT_EQ(a.ids.size(), model.pool.size());
}

TEST(EnsembleTest, SinusoidWindowsFavorSeasonalNaive) {
    const auto& model = regime_model();
    const auto& data = regime_data();
    int hits = 0;
    int windows = 0;
    for (std::size_t end = 40; end <= 100 && windows < 50; ++end) {
        if (data.regimes[end - 1] != Regime::sinusoid || data.regimes[end - 35] != Regime::sinusoid) continue;
        const auto c = predict_next(model, data.series.slice(0, end), 7);
        const auto top = std::max_element(c.weights.begin(), c.weights.end()) - c.weights.begin();
        hits += c.ids[static_cast<std::size_t>(top)] == "seasonal_naive" ? 1 : 0;
        ++windows;
    }
    ASSERT_GE(windows, 50);
    EXPECT_GE(hits, 40) << hits << " of " << windows;
}

TEST(EnsembleTest, SaveLoadRoundTrip) {
    const auto& model = regime_model();
    const auto dir = std::filesystem::temp_directory_path() / "regimecast_ensemble_test_model";
    std::filesystem::remove_all(dir);
    save_model(model, dir);
    const auto back = load_model(dir);
    EXPECT_EQ(to_json(back.rules), to_json(model.rules));
    EXPECT_EQ(to_json(back.config), to_json(model.config));
    EXPECT_EQ(back.discarded, model.discarded);
    const auto history = regime_data().series.slice(0, 200);
    EXPECT_EQ(predict_next(back, history, 7).values, predict_next(model, history, 7).values);
    std::filesystem::remove_all(dir);
}

TEST(EnsembleTest, TrainingIsDeterministicAcrossWorkers) {
    auto config = small_config();
    config.workers = 4;
    config.rulefit.workers = 4;
    const auto model = train_ensemble(regime_data().series, config);
    EXPECT_EQ(to_json(model.rules), to_json(regime_model().rules));
    EXPECT_EQ(to_json(model.report), to_json(regime_model().report));
}

TEST(EnsembleConfigTest, ValidationAndJsonRoundTrip) {
    auto config = small_config();
    config.top_k = 2;
    EXPECT_NO_THROW(config.validate());
    const auto back = ensemble_config_from_json(to_json(config));
    EXPECT_EQ(to_json(back), to_json(config));

    auto bad = config;
    bad.n = 10;
    EXPECT_THROW(bad.validate(), ConfigError) << "holt_winters needs 14 points";
    bad = config;
    bad.top_k = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = config;
    bad.enet.l1_ratio = 1.5;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = config;
    bad.pool.push_back(bad.pool.front());
    EXPECT_THROW(bad.validate(), ConfigError);
    auto j = to_json(config);
    j.erase("metric");
    EXPECT_THROW(ensemble_config_from_json(j), DataError);
}

// Continues the regime series with points built by `value(i)`.
TimeSeries continuation(const TimeSeries& history, std::size_t count, const std::function<double(std::size_t)>& value) {
    const Timestamp step = history.step();
    const Timestamp last = history.timestamps().back();
    std::vector<Timestamp> ts;
    std::vector<double> y;
    std::vector<std::string> hint;
    for (std::size_t i = 0; i < count; ++i) {
        ts.push_back(last + step * static_cast<Timestamp>(i + 1));
        y.push_back(value(i));
        hint.push_back("sinusoid");
    }
    return TimeSeries(ts, y, {Covariate::make_categorical("regime_hint", hint)});
}

TEST(OnlineEnsembleTest, StationaryStreamNeverRetrains) {
    const auto& series = regime_data().series;
    const auto history = series.slice(0, 100);
    OnlineEnsemble online(regime_model(), history, DriftConfig{});
    const auto stream = continuation(history, 300, [](std::size_t i) {
        return 100.0 + 10.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / 7.0);
    });
    for (std::size_t b = 0; b < stream.size(); b += 10) {
        const auto r = online.step(stream.slice(b, b + 10), 7);
        EXPECT_TRUE(r.drifts.empty());
        EXPECT_EQ(r.forecast.values.size(), 7u);
    }
    EXPECT_TRUE(online.retrains().empty());
    EXPECT_EQ(online.history().size(), 400u);
}

class ScriptedDetector : public DriftDetector {
public:
    explicit ScriptedDetector(std::set<Timestamp> fire_at) : fire_at_(std::move(fire_at)) {}
    std::optional<DriftEvent> update(double, Timestamp ts) override {
        if (fire_at_.count(ts) == 0) return std::nullopt;
        return DriftEvent{ts, "scripted", 1.0, 0.5};
    }
    [[nodiscard]] std::string_view name() const override { return "scripted"; }
    [[nodiscard]] std::unique_ptr<DriftDetector> clone() const override {
        return std::make_unique<ScriptedDetector>(*this);
    }

private:
    std::set<Timestamp> fire_at_;
};

TEST(OnlineEnsembleTest, GuardSuppressesRetrainsInsideInterval) {
    const auto& series = regime_data().series;
    const auto history = series.slice(0, 200);
    const auto stream = series.slice(200, 230);
    const Timestamp origin = history.timestamps().back();
    auto day = [origin](int d) { return origin + d * kSecondsPerDay; };
    OnlineEnsemble online(regime_model(), history,
                          std::make_unique<ScriptedDetector>(std::set<Timestamp>{day(1), day(7), day(20)}),
                          14 * kSecondsPerDay);
    std::vector<bool> allowed;
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto r = online.step(stream.slice(i, i + 1), 7);
        allowed.insert(allowed.end(), r.allowed.begin(), r.allowed.end());
    }
    EXPECT_EQ(allowed, (std::vector<bool>{true, false, true}));
    ASSERT_EQ(online.retrains().size(), 2u);
    EXPECT_EQ(online.retrains()[0].timestamp, day(1));
    EXPECT_EQ(online.retrains()[1].timestamp, day(20));
    EXPECT_NE(online.model().get(), nullptr);
}

TEST(OnlineEnsembleTest, LevelShiftTriggersRetrain) {
    const auto& series = regime_data().series;
    const auto history = series.slice(0, 100);
    int detected = 0;
    constexpr int kRuns = 50;
    for (int run = 0; run < kRuns; ++run) {
        Rng rng(100 + static_cast<std::uint64_t>(run));
        DriftConfig drift;
        drift.kswin.seed = static_cast<std::uint64_t>(run);
        OnlineEnsemble online(regime_model(), history, drift);
        const double sigma = 2.0;
        const auto stream = continuation(history, 180, [&](std::size_t i) {
            return rng.normal(i < 120 ? 100.0 : 100.0 + 3.0 * sigma, sigma);
        });
        const Timestamp shift_at = stream.timestamps()[120];
        for (std::size_t b = 0; b < stream.size(); b += 5) {
            online.step(stream.slice(b, b + 5), 7);
        }
        for (const auto& r : online.retrains()) {
            if (r.timestamp >= shift_at && r.timestamp < shift_at + 60 * kSecondsPerDay) {
                ++detected;
                break;
            }
        }
    }
    EXPECT_GE(detected, 40) << detected << " of " << kRuns;
}

}  // namespace
}  // namespace regimecast
