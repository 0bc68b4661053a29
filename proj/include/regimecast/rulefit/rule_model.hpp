#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "regimecast/core/matrix.hpp"

namespace regimecast {

enum class Comparison { less_equal, greater };

/// One threshold condition. A missing feature value never satisfies it.
struct Conjunct {
    std::string feature;
    std::size_t feature_index = 0;
    Comparison op = Comparison::less_equal;
    double threshold = 0.0;

    [[nodiscard]] bool satisfied_by(double value) const;
    [[nodiscard]] std::string render() const;

    friend bool operator==(const Conjunct& a, const Conjunct& b) {
        return a.feature_index == b.feature_index && a.op == b.op && a.threshold == b.threshold;
    }
};

struct Rule {
    std::vector<Conjunct> conjuncts;
    /// Fraction of training rows satisfying every conjunct.
    double support = 0.0;
    /// One coefficient per class, in class-id order.
    std::vector<double> coefficients;

    [[nodiscard]] bool applies(std::span<const double> row) const;
    /// "f1 <= 7.2 AND f2 > 14", conjuncts in stored order.
    [[nodiscard]] std::string render() const;
};

/// Raw feature clipped to [lower, upper], then z-scored with the training
/// mean and standard deviation of the clipped values. Missing maps to 0.
struct LinearTerm {
    std::string feature;
    std::size_t feature_index = 0;
    double lower = 0.0;
    double upper = 0.0;
    double mean = 0.0;
    double std_dev = 1.0;
    std::vector<double> coefficients;

    [[nodiscard]] double transform(double value) const;
};

struct RuleModel {
    std::string catalog_version;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_ids;
    std::vector<Rule> rules;
    std::vector<LinearTerm> linear_terms;
    std::vector<double> intercepts;
    /// Set when no rule or linear term kept a non-zero coefficient and the
    /// model predicts per-class base rates.
    bool intercept_only = false;

    /// Per-class one-vs-rest logits z_k.
    [[nodiscard]] std::vector<double> scores(std::span<const double> row) const;
};

/// Training rows for the classifier: one feature row and one class index per
/// window.
struct LabeledRows {
    std::string catalog_version;
    std::vector<std::string> feature_names;
    Matrix features;
    std::vector<std::string> class_ids;
    std::vector<int> labels;  ///< index into class_ids
};

struct RuleFitConfig {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double subsample = 0.75;
    std::size_t min_samples_leaf = 5;
    /// Inverse L1 strength of the per-class logistic layer.
    double l1_c = 50.0;
    bool include_linear_terms = false;
    std::uint64_t seed = 0;
    /// Threads for the per-class fits; 0 uses all cores.
    std::size_t workers = 1;

    void validate() const;
};

/// Boosted trees per class, rules from every non-root node path, duplicate
/// conjunct sets merged, sparse one-vs-rest logistic layer, rules with all
/// coefficients zero pruned. Falls back to an intercept-only model when
/// nothing survives. Requires >= 10 rows and >= 1 row for every class, with
/// at least 2 classes.
RuleModel fit_rule_model(const LabeledRows& table, const RuleFitConfig& config);

/// p_k = sigmoid(z_k) / sum_j sigmoid(z_j), evaluated in log space.
std::vector<double> normalized_probabilities(std::span<const double> scores);

/// Probability vector for one feature row laid out as model.feature_names.
/// Throws DataError on a catalog version or width mismatch.
std::vector<double> predict_proba(const RuleModel& model, std::span<const double> row,
                                  std::string_view catalog_version);

enum class ExplainOrder { support, coefficient };

/// The top_k retained rules by support or by largest absolute coefficient,
/// ties broken by rendered rule string.
std::vector<Rule> explain(const RuleModel& model, std::size_t top_k, ExplainOrder order);
std::string explain_text(const RuleModel& model, std::size_t top_k, ExplainOrder order);
nlohmann::json explain_json(const RuleModel& model, std::size_t top_k, ExplainOrder order);

nlohmann::json to_json(const RuleModel& model);
RuleModel rule_model_from_json(const nlohmann::json& j);

}  // namespace regimecast
