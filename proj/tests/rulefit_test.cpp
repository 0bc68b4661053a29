#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "regimecast/core/error.hpp"
#include "regimecast/core/random.hpp"
#include "regimecast/featurizer/features.hpp"
#include "regimecast/optim/logistic.hpp"
#include "regimecast/rulefit/rule_model.hpp"
#include "regimecast/rulefit/trees.hpp"

namespace regimecast {
namespace {

constexpr const char* kVersion = "window-stats-1";

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

LabeledRows threshold_table(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledRows t;
    t.catalog_version = kVersion;
    t.feature_names = {"noise", "x"};
    t.class_ids = {"A", "B"};
    t.features = Matrix(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        double x = 0.0;
        while (x == 0.0) x = rng.uniform() * 2.0 - 1.0;
        t.features(i, 0) = rng.normal();
        t.features(i, 1) = x;
        t.labels.push_back(x > 0 ? 0 : 1);
    }
    return t;
}

LabeledRows random_table(Rng& rng) {
    LabeledRows t;
    t.catalog_version = kVersion;
    const std::size_t n = 10 + rng.uniform_index(50);
    const std::size_t p = 1 + rng.uniform_index(5);
    const std::size_t k = 2 + rng.uniform_index(3);
    for (std::size_t j = 0; j < p; ++j) t.feature_names.push_back("f" + std::to_string(j));
    for (std::size_t c = 0; c < k; ++c) t.class_ids.push_back("c" + std::to_string(c));
    t.features = Matrix(n, p);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) t.features(i, j) = rng.uniform() < 0.05 ? kMissing : rng.normal();
        t.labels.push_back(static_cast<int>(i < k ? i : rng.uniform_index(k)));
    }
    return t;
}

RuleFitConfig small_config(std::uint64_t seed) {
    RuleFitConfig c;
    c.n_trees = 10;
    c.min_samples_leaf = 2;
    c.seed = seed;
    return c;
}

double weighted_sse(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return 0.0;
    double mean = 0.0;
    for (auto r : rows) mean += y[r] / static_cast<double>(rows.size());
    double ss = 0.0;
    for (auto r : rows) ss += (y[r] - mean) * (y[r] - mean);
    return ss;
}

TEST(TreeTest, RootSplitMatchesBruteForce) {
    Rng rng(1);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 12 + rng.uniform_index(30);
        Matrix x(n, 3);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < 3; ++j) x(i, j) = std::round(rng.normal() * 4.0) / 4.0;
            y[i] = x(i, trial % 3) > 0.1 ? 2.0 + rng.normal() : rng.normal();
        }
        const TreeParams params{1, 3};
        const auto tree = fit_regression_tree(x, y, params);
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);
        double best = weighted_sse(y, all);
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t a = 0; a < n; ++a) {
                std::vector<std::size_t> left, right;
                for (std::size_t i = 0; i < n; ++i) (x(i, j) <= x(a, j) ? left : right).push_back(i);
                if (left.size() < params.min_samples_leaf || right.size() < params.min_samples_leaf) continue;
                best = std::min(best, weighted_sse(y, left) + weighted_sse(y, right));
            }
        }
        ASSERT_FALSE(tree.nodes[0].is_leaf());
        const auto& root = tree.nodes[0];
        std::vector<std::size_t> left, right;
        for (std::size_t i = 0; i < n; ++i) {
            (x(i, static_cast<std::size_t>(root.feature)) <= root.threshold ? left : right).push_back(i);
        }
        EXPECT_NEAR(weighted_sse(y, left) + weighted_sse(y, right), best, 1e-9);
        EXPECT_EQ(left.size(), tree.nodes[static_cast<std::size_t>(root.left)].samples);
    }
}

TEST(TreeTest, MissingValuesStopAtNode) {
    Matrix x(20, 1);
    std::vector<double> y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        x(i, 0) = i % 5 == 0 ? kMissing : static_cast<double>(i);
        y[i] = i < 10 ? 0.0 : 1.0;
    }
    const auto tree = fit_regression_tree(x, y, {2, 2});
    std::size_t leaf_samples = 0;
    for (const auto& node : tree.nodes) {
        if (node.depth == 1) leaf_samples += node.samples;
    }
    EXPECT_EQ(leaf_samples, 16u);
    const std::vector<double> row{kMissing};
    EXPECT_EQ(tree.predict(row), tree.nodes[0].value);
}

TEST(RuleFitTest, ThresholdSeparableTable) {
    const auto table = threshold_table(200, 3);
    double max_negative = -std::numeric_limits<double>::infinity();
    double min_positive = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 200; ++i) {
        const double x = table.features(i, 1);
        if (x > 0) min_positive = std::min(min_positive, x);
        else max_negative = std::max(max_negative, x);
    }
    const auto model = fit_rule_model(table, RuleFitConfig{});
    bool found = false;
    for (const auto& rule : model.rules) {
        if (rule.conjuncts.size() == 1 && rule.conjuncts[0].feature == "x") {
            const double t = rule.conjuncts[0].threshold;
            found = found || (t >= max_negative && t < min_positive);
        }
    }
    EXPECT_TRUE(found);
    for (std::size_t i = 0; i < 200; ++i) {
        const auto p = predict_proba(model, table.features.row(i), kVersion);
        EXPECT_EQ(static_cast<int>(argmax(p)), table.labels[i]) << i;
    }
}

TEST(RuleFitTest, NoSignalFallsBackToBaseRates) {
    LabeledRows t;
    t.catalog_version = kVersion;
    t.feature_names = {"a", "b"};
    t.class_ids = {"A", "B"};
    t.features = Matrix(50, 2, 1.5);
    for (int i = 0; i < 50; ++i) t.labels.push_back(i < 30 ? 0 : 1);
    const auto model = fit_rule_model(t, RuleFitConfig{});
    EXPECT_TRUE(model.intercept_only);
    EXPECT_TRUE(model.rules.empty());
    const auto p = predict_proba(model, std::vector<double>{1.5, 1.5}, kVersion);
    EXPECT_NEAR(p[0], 0.6, 0.05);
    EXPECT_NEAR(p[1], 0.4, 0.05);
}

TEST(RuleFitTest, SupportCountsSatisfiedRows) {
    LabeledRows t;
    t.catalog_version = kVersion;
    t.feature_names = {"x"};
    t.class_ids = {"A", "B"};
    t.features = Matrix(10, 1);
    for (int i = 0; i < 10; ++i) {
        t.features(static_cast<std::size_t>(i), 0) = i + 1;
        t.labels.push_back(i >= 6 ? 0 : 1);
    }
    auto config = small_config(0);
    config.min_samples_leaf = 1;
    config.max_depth = 1;
    const auto model = fit_rule_model(t, config);
    bool found = false;
    for (const auto& rule : model.rules) {
        const auto& c = rule.conjuncts.front();
        if (rule.conjuncts.size() == 1 && c.op == Comparison::greater && c.threshold >= 6 && c.threshold < 7) {
            EXPECT_EQ(rule.support, 0.4);
            found = true;
        }
    }
    EXPECT_TRUE(found);
}

TEST(RuleFitTest, SupportEqualsExactCountsProperty) {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const auto table = random_table(rng);
        const auto model = fit_rule_model(table, small_config(static_cast<std::uint64_t>(trial)));
        const std::size_t n = table.features.rows();
        for (const auto& rule : model.rules) {
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) count += rule.applies(table.features.row(i)) ? 1 : 0;
            EXPECT_EQ(rule.support, static_cast<double>(count) / static_cast<double>(n));
            EXPECT_GT(rule.support, 0.0);
            EXPECT_LT(rule.support, 1.0);
            EXPECT_GE(rule.conjuncts.size(), 1u);
            EXPECT_LE(rule.conjuncts.size(), 3u);
            EXPECT_TRUE(std::any_of(rule.coefficients.begin(), rule.coefficients.end(),
                                    [](double c) { return c != 0.0; }));
        }
    }
}

TEST(RuleFitTest, ProbabilitiesSumToOneProperty) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto table = random_table(rng);
        auto config = small_config(static_cast<std::uint64_t>(trial));
        config.include_linear_terms = trial % 2 == 0;
        config.l1_c = 0.5 + rng.uniform() * 200.0;
        const auto model = fit_rule_model(table, config);
        ASSERT_EQ(model.class_ids, table.class_ids);
        for (int r = 0; r < 5; ++r) {
            std::vector<double> row(table.feature_names.size());
            for (auto& v : row) v = rng.uniform() < 0.1 ? kMissing : rng.normal(0.0, 5.0);
            const auto p = predict_proba(model, row, kVersion);
            double sum = 0.0;
            for (double v : p) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
                sum += v;
            }
            EXPECT_NEAR(sum, 1.0, 1e-9);
        }
    }
}

TEST(RuleFitTest, NormalizationOfExtremeScores) {
    for (const auto& z : std::vector<std::vector<double>>{{0, 0}, {3, 3, 3}, {800, -800}, {-900, -950, -1000}}) {
        const auto p = normalized_probabilities(z);
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
        for (double v : p) EXPECT_TRUE(std::isfinite(v));
    }
    const auto uniform = normalized_probabilities(std::vector<double>{3, 3, 3});
    for (double v : uniform) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(PredictProbaTest, EqualInterceptsGiveHalfHalf) {
    RuleModel m;
    m.catalog_version = kVersion;
    m.feature_names = {"x"};
    m.class_ids = {"A", "B"};
    m.intercepts = {0.4, 0.4};
    m.intercept_only = true;
    const auto p = predict_proba(m, std::vector<double>{7.0}, kVersion);
    EXPECT_EQ(p, (std::vector<double>{0.5, 0.5}));
}

TEST(PredictProbaTest, SingleRuleDirectEvaluation) {
    RuleModel m;
    m.catalog_version = kVersion;
    m.feature_names = {"x"};
    m.class_ids = {"A", "B"};
    m.intercepts = {-5.0, -3.0};
    m.rules.push_back({{{"x", 0, Comparison::greater, 0.0}}, 0.5, {10.0, 0.0}});
    auto expected = [](double za, double zb) { return sigmoid(za) / (sigmoid(za) + sigmoid(zb)); };
    const auto on = predict_proba(m, std::vector<double>{1.0}, kVersion);
    const auto off = predict_proba(m, std::vector<double>{-1.0}, kVersion);
    EXPECT_NEAR(on[0], expected(5.0, -3.0), 1e-12);
    EXPECT_NEAR(off[0], expected(-5.0, -3.0), 1e-12);
    EXPECT_GT(on[0], 0.9);
    EXPECT_LT(off[0], 0.5);
}

TEST(PredictProbaTest, CatalogAndWidthChecked) {
    RuleModel m;
    m.catalog_version = kVersion;
    m.feature_names = {"x"};
    m.class_ids = {"A", "B"};
    m.intercepts = {0.0, 0.0};
    EXPECT_THROW(predict_proba(m, std::vector<double>{1.0}, "window-stats-0"), DataError);
    EXPECT_THROW(predict_proba(m, std::vector<double>{1.0, 2.0}, kVersion), DataError);
}

TEST(RuleTest, RenderAndMissingSemantics) {
    const Rule rule{{{"variance", 0, Comparison::less_equal, 7.2}, {"mean", 1, Comparison::greater, 40}}, 0.1, {}};
    EXPECT_EQ(rule.render(), "variance <= 7.2 AND mean > 40");
    EXPECT_TRUE(rule.applies(std::vector<double>{7.2, 41}));
    EXPECT_FALSE(rule.applies(std::vector<double>{7.3, 41}));
    EXPECT_FALSE(rule.applies(std::vector<double>{7.0, 40}));
    EXPECT_FALSE(rule.applies(std::vector<double>{kMissing, 41}));
}

TEST(RuleTest, MonotoneActivationProperty) {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const auto table = random_table(rng);
        const auto model = fit_rule_model(table, small_config(static_cast<std::uint64_t>(trial)));
        for (const auto& rule : model.rules) {
            for (const auto& c : rule.conjuncts) {
                std::vector<double> base(table.feature_names.size(), 0.0);
                for (std::size_t i = 0; i < table.features.rows(); ++i) {
                    if (rule.applies(table.features.row(i))) {
                        const auto r = table.features.row(i);
                        base.assign(r.begin(), r.end());
                        break;
                    }
                }
                auto below = base;
                auto above = base;
                below[c.feature_index] = c.threshold;
                above[c.feature_index] = std::nextafter(c.threshold, std::numeric_limits<double>::infinity());
                EXPECT_NE(rule.applies(below), rule.applies(above)) << rule.render();
                for (const auto& other : model.rules) {
                    if (other.applies(below) == other.applies(above)) continue;
                    const bool shares = std::any_of(other.conjuncts.begin(), other.conjuncts.end(), [&](const Conjunct& o) {
                        return o.feature_index == c.feature_index && o.threshold == c.threshold;
                    });
                    EXPECT_TRUE(shares) << other.render();
                }
            }
        }
    }
}

TEST(RuleFitTest, DeterministicAcrossRunsAndWorkers) {
    Rng rng(9);
    const auto table = random_table(rng);
    auto config = small_config(42);
    const auto a = to_json(fit_rule_model(table, config));
    config.workers = 4;
    const auto b = to_json(fit_rule_model(table, config));
    EXPECT_EQ(a.dump(), b.dump());
    EXPECT_EQ(a.dump(), to_json(fit_rule_model(table, small_config(42))).dump());
}

TEST(RuleFitTest, JsonRoundTrip) {
    Rng rng(10);
    const auto table = random_table(rng);
    auto config = small_config(1);
    config.include_linear_terms = true;
    const auto model = fit_rule_model(table, config);
    const auto j = to_json(model);
    const auto back = rule_model_from_json(j);
    EXPECT_EQ(to_json(back).dump(), j.dump());
    for (std::size_t i = 0; i < table.features.rows(); ++i) {
        EXPECT_EQ(predict_proba(back, table.features.row(i), kVersion),
                  predict_proba(model, table.features.row(i), kVersion));
    }
}

TEST(RuleFitTest, InfeasibleTables) {
    auto table = threshold_table(9, 1);
    EXPECT_THROW(fit_rule_model(table, RuleFitConfig{}), InfeasibleError);
    table = threshold_table(20, 1);
    table.class_ids.push_back("C");
    EXPECT_THROW(fit_rule_model(table, RuleFitConfig{}), InfeasibleError);
    RuleFitConfig bad;
    bad.l1_c = 0.0;
    EXPECT_THROW(fit_rule_model(threshold_table(20, 1), bad), ConfigError);
}

TEST(ExplainTest, OrderingAndTieBreak) {
    RuleModel m;
    m.catalog_version = kVersion;
    m.feature_names = {"a", "b"};
    m.class_ids = {"A", "B"};
    m.intercepts = {0.0, 0.0};
    m.rules.push_back({{{"b", 1, Comparison::greater, 1.0}}, 0.3, {0.5, 0.0}});
    m.rules.push_back({{{"a", 0, Comparison::greater, 2.0}}, 0.3, {0.0, -2.0}});
    m.rules.push_back({{{"a", 0, Comparison::less_equal, 2.0}}, 0.6, {0.1, 0.0}});
    const auto top = explain(m, 1, ExplainOrder::support);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].render(), "a <= 2");
    const auto by_support = explain(m, 3, ExplainOrder::support);
    EXPECT_EQ(by_support[1].render(), "a > 2");
    EXPECT_EQ(by_support[2].render(), "b > 1");
    const auto by_coef = explain(m, 3, ExplainOrder::coefficient);
    EXPECT_EQ(by_coef[0].render(), "a > 2");
    EXPECT_EQ(explain(m, 10, ExplainOrder::support).size(), 3u);
    EXPECT_NE(explain_text(m, 2, ExplainOrder::support).find("a <= 2"), std::string::npos);
    EXPECT_EQ(explain_json(m, 2, ExplainOrder::support)["rules"].size(), 2u);
}

}  // namespace
}  // namespace regimecast
