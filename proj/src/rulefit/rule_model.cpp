#include "regimecast/rulefit/rule_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>

#include "regimecast/core/csv.hpp"
#include "regimecast/core/error.hpp"
#include "regimecast/core/parallel.hpp"
#include "regimecast/core/random.hpp"
#include "regimecast/featurizer/features.hpp"
#include "regimecast/optim/logistic.hpp"
#include "regimecast/rulefit/trees.hpp"

namespace regimecast {
namespace {

constexpr int kFormatVersion = 1;
constexpr double kWinsorLower = 0.025;
constexpr double kWinsorUpper = 0.975;

using ConjunctKey = std::vector<std::tuple<std::size_t, int, double>>;

ConjunctKey key_of(const std::vector<Conjunct>& conjuncts) {
    ConjunctKey key;
    for (const auto& c : conjuncts) {
        key.emplace_back(c.feature_index, static_cast<int>(c.op), c.threshold);
    }
    std::sort(key.begin(), key.end());
    return key;
}

/// Root-to-node conjuncts, keeping only the tightest bound per (feature, op).
std::vector<Conjunct> path_conjuncts(const RegressionTree& tree, std::size_t node,
                                     const std::vector<std::string>& names) {
    std::vector<Conjunct> reversed;
    auto child = static_cast<int>(node);
    while (tree.nodes[static_cast<std::size_t>(child)].parent >= 0) {
        const int parent = tree.nodes[static_cast<std::size_t>(child)].parent;
        const auto& p = tree.nodes[static_cast<std::size_t>(parent)];
        Conjunct c;
        c.feature_index = static_cast<std::size_t>(p.feature);
        c.feature = names[c.feature_index];
        c.op = (p.left == child) ? Comparison::less_equal : Comparison::greater;
        c.threshold = p.threshold;
        reversed.push_back(std::move(c));
        child = parent;
    }
    std::vector<Conjunct> out;
    for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
        auto same = std::find_if(out.begin(), out.end(), [&](const Conjunct& c) {
            return c.feature_index == it->feature_index && c.op == it->op;
        });
        if (same == out.end()) {
            out.push_back(*it);
        } else if (it->op == Comparison::less_equal) {
            same->threshold = std::min(same->threshold, it->threshold);
        } else {
            same->threshold = std::max(same->threshold, it->threshold);
        }
    }
    return out;
}

double quantile(std::vector<double> sorted_values, double q) {
    std::sort(sorted_values.begin(), sorted_values.end());
    const double pos = q * static_cast<double>(sorted_values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted_values.size() - 1);
    return sorted_values[lo] + (pos - static_cast<double>(lo)) * (sorted_values[hi] - sorted_values[lo]);
}

std::optional<LinearTerm> make_linear_term(const Matrix& x, std::size_t j, const std::string& name) {
    std::vector<double> present;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (!is_missing(x(i, j))) {
            present.push_back(x(i, j));
        }
    }
    if (present.size() < 2) {
        return std::nullopt;
    }
    LinearTerm term;
    term.feature = name;
    term.feature_index = j;
    term.lower = quantile(present, kWinsorLower);
    term.upper = quantile(present, kWinsorUpper);
    double sum = 0.0;
    for (double& v : present) {
        v = std::clamp(v, term.lower, term.upper);
        sum += v;
    }
    term.mean = sum / static_cast<double>(present.size());
    double ss = 0.0;
    for (double v : present) {
        ss += (v - term.mean) * (v - term.mean);
    }
    term.std_dev = std::sqrt(ss / static_cast<double>(present.size()));
    if (!(term.std_dev > 0.0)) {
        return std::nullopt;
    }
    return term;
}

double log_sigmoid(double z) {
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

std::string_view op_symbol(Comparison op) { return op == Comparison::less_equal ? "<=" : ">"; }

void check_table(const LabeledRows& table) {
    const std::size_t n = table.features.rows();
    if (table.features.cols() != table.feature_names.size()) {
        throw DataError("rulefit", "feature name count differs from column count");
    }
    if (table.labels.size() != n) {
        throw DataError("rulefit", "label count differs from row count");
    }
    if (n < 10) {
        throw InfeasibleError("rulefit", "need at least 10 rows, got " + std::to_string(n));
    }
    if (table.class_ids.size() < 2) {
        throw InfeasibleError("rulefit", "need at least 2 classes");
    }
    std::vector<std::size_t> counts(table.class_ids.size(), 0);
    for (int label : table.labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= counts.size()) {
            throw DataError("rulefit", "label index out of range: " + std::to_string(label));
        }
        ++counts[static_cast<std::size_t>(label)];
    }
    for (std::size_t k = 0; k < counts.size(); ++k) {
        if (counts[k] == 0) {
            throw InfeasibleError("rulefit", "class '" + table.class_ids[k] + "' has no rows");
        }
        if (counts[k] == n) {
            throw InfeasibleError("rulefit", "single-class table ('" + table.class_ids[k] + "')");
        }
    }
}

double max_abs(const std::vector<double>& values) {
    double m = 0.0;
    for (double v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

}  // namespace

bool Conjunct::satisfied_by(double value) const {
    if (is_missing(value)) {
        return false;
    }
    return op == Comparison::less_equal ? value <= threshold : value > threshold;
}

std::string Conjunct::render() const {
    return feature + " " + std::string(op_symbol(op)) + " " + csv::format_double(threshold);
}

bool Rule::applies(std::span<const double> row) const {
    return std::all_of(conjuncts.begin(), conjuncts.end(),
                       [&](const Conjunct& c) { return c.satisfied_by(row[c.feature_index]); });
}

std::string Rule::render() const {
    std::string out;
    for (std::size_t i = 0; i < conjuncts.size(); ++i) {
        if (i > 0) {
            out += " AND ";
        }
        out += conjuncts[i].render();
    }
    return out;
}

double LinearTerm::transform(double value) const {
    if (is_missing(value)) {
        return 0.0;
    }
    return (std::clamp(value, lower, upper) - mean) / std_dev;
}

std::vector<double> RuleModel::scores(std::span<const double> row) const {
    std::vector<double> z = intercepts;
    for (const auto& rule : rules) {
        if (rule.applies(row)) {
            for (std::size_t k = 0; k < z.size(); ++k) {
                z[k] += rule.coefficients[k];
            }
        }
    }
    for (const auto& term : linear_terms) {
        const double v = term.transform(row[term.feature_index]);
        for (std::size_t k = 0; k < z.size(); ++k) {
            z[k] += term.coefficients[k] * v;
        }
    }
    return z;
}

void RuleFitConfig::validate() const {
    if (n_trees < 1) {
        throw ConfigError("rulefit", "n_trees must be >= 1");
    }
    if (max_depth < 1) {
        throw ConfigError("rulefit", "max_depth must be >= 1");
    }
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw ConfigError("rulefit", "learning_rate must be in (0, 1]");
    }
    if (!(subsample > 0.0 && subsample <= 1.0)) {
        throw ConfigError("rulefit", "subsample must be in (0, 1]");
    }
    if (min_samples_leaf < 1) {
        throw ConfigError("rulefit", "min_samples_leaf must be >= 1");
    }
    if (!(l1_c > 0.0) || !std::isfinite(l1_c)) {
        throw ConfigError("rulefit", "l1_c must be positive and finite");
    }
}

RuleModel fit_rule_model(const LabeledRows& table, const RuleFitConfig& config) {
    config.validate();
    check_table(table);
    const Matrix& x = table.features;
    const std::size_t n = x.rows();
    const std::size_t classes = table.class_ids.size();

    std::vector<std::vector<RegressionTree>> forests(classes);
    const BoostingParams boosting{config.n_trees, config.max_depth, config.learning_rate, config.subsample,
                                  config.min_samples_leaf};
    parallel_for(classes, config.workers, [&](std::size_t k) {
        std::vector<double> target(n);
        for (std::size_t i = 0; i < n; ++i) {
            target[i] = table.labels[i] == static_cast<int>(k) ? 1.0 : 0.0;
        }
        Rng rng(config.seed + k);
        forests[k] = fit_boosted_trees(x, target, boosting, rng);
    });

    std::vector<Rule> candidates;
    std::vector<SparseColumn> activations;
    std::map<ConjunctKey, std::size_t> seen;
    for (const auto& forest : forests) {
        for (const auto& tree : forest) {
            for (std::size_t node = 1; node < tree.nodes.size(); ++node) {
                Rule rule;
                rule.conjuncts = path_conjuncts(tree, node, table.feature_names);
                if (!seen.emplace(key_of(rule.conjuncts), candidates.size()).second) {
                    continue;
                }
                SparseColumn column;
                for (std::size_t i = 0; i < n; ++i) {
                    if (rule.applies(x.row(i))) {
                        column.rows.push_back(i);
                    }
                }
                if (column.rows.empty() || column.rows.size() == n) {
                    continue;
                }
                rule.support = static_cast<double>(column.rows.size()) / static_cast<double>(n);
                candidates.push_back(std::move(rule));
                activations.push_back(std::move(column));
            }
        }
    }

    std::vector<LinearTerm> terms;
    if (config.include_linear_terms) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (auto term = make_linear_term(x, j, table.feature_names[j])) {
                SparseColumn column;
                for (std::size_t i = 0; i < n; ++i) {
                    column.rows.push_back(i);
                    column.values.push_back(term->transform(x(i, j)));
                }
                terms.push_back(std::move(*term));
                activations.push_back(std::move(column));
            }
        }
    }

    SparseDesign design{n, std::move(activations)};
    std::vector<LinearFit> fits(classes);
    const LogisticSpec logistic{config.l1_c, 100, 1e-6};
    parallel_for(classes, config.workers, [&](std::size_t k) {
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = table.labels[i] == static_cast<int>(k) ? 1 : 0;
        }
        fits[k] = fit_l1_logistic(design, y, logistic);
    });

    RuleModel model;
    model.catalog_version = table.catalog_version;
    model.feature_names = table.feature_names;
    model.class_ids = table.class_ids;
    for (std::size_t k = 0; k < classes; ++k) {
        model.intercepts.push_back(fits[k].intercept);
    }
    auto coefficients_of = [&](std::size_t column) {
        std::vector<double> coefs(classes);
        for (std::size_t k = 0; k < classes; ++k) {
            coefs[k] = fits[k].weights[column];
        }
        return coefs;
    };
    for (std::size_t r = 0; r < candidates.size(); ++r) {
        auto coefs = coefficients_of(r);
        if (max_abs(coefs) > 0.0) {
            candidates[r].coefficients = std::move(coefs);
            model.rules.push_back(std::move(candidates[r]));
        }
    }
    for (std::size_t t = 0; t < terms.size(); ++t) {
        auto coefs = coefficients_of(candidates.size() + t);
        if (max_abs(coefs) > 0.0) {
            terms[t].coefficients = std::move(coefs);
            model.linear_terms.push_back(std::move(terms[t]));
        }
    }

    if (model.rules.empty() && model.linear_terms.empty()) {
        model.intercept_only = true;
        std::vector<double> counts(classes, 0.0);
        for (int label : table.labels) {
            counts[static_cast<std::size_t>(label)] += 1.0;
        }
        for (std::size_t k = 0; k < classes; ++k) {
            const double rate = counts[k] / static_cast<double>(n);
            model.intercepts[k] = std::log(rate / (1.0 - rate));
        }
    }
    return model;
}

std::vector<double> normalized_probabilities(std::span<const double> scores) {
    std::vector<double> logs(scores.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < scores.size(); ++k) {
        logs[k] = log_sigmoid(scores[k]);
        top = std::max(top, logs[k]);
    }
    double total = 0.0;
    for (double& v : logs) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : logs) {
        v /= total;
    }
    return logs;
}

std::vector<double> predict_proba(const RuleModel& model, std::span<const double> row,
                                  std::string_view catalog_version) {
    if (catalog_version != model.catalog_version) {
        throw DataError("rulefit", "feature catalog version '" + std::string(catalog_version) +
                                       "' does not match the model's '" + model.catalog_version +
                                       "'; retrain the model with the current catalog");
    }
    if (row.size() != model.feature_names.size()) {
        throw DataError("rulefit", "row has " + std::to_string(row.size()) + " features, model expects " +
                                       std::to_string(model.feature_names.size()));
    }
    const auto z = model.scores(row);
    return normalized_probabilities(z);
}

std::vector<Rule> explain(const RuleModel& model, std::size_t top_k, ExplainOrder order) {
    struct Ranked {
        const Rule* rule;
        double key;
        std::string text;
    };
    std::vector<Ranked> ranked;
    for (const auto& rule : model.rules) {
        const double key = order == ExplainOrder::support ? rule.support : max_abs(rule.coefficients);
        ranked.push_back({&rule, key, rule.render()});
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.key != b.key) {
            return a.key > b.key;
        }
        return a.text < b.text;
    });
    std::vector<Rule> out;
    for (std::size_t i = 0; i < ranked.size() && i < top_k; ++i) {
        out.push_back(*ranked[i].rule);
    }
    return out;
}

std::string explain_text(const RuleModel& model, std::size_t top_k, ExplainOrder order) {
    std::string out;
    if (model.intercept_only) {
        out += "(intercept-only model: no rule kept a non-zero coefficient)\n";
    }
    char buf[64];
    for (const auto& rule : explain(model, top_k, order)) {
        std::snprintf(buf, sizeof buf, "%.3f", rule.support);
        out += rule.render() + "  [support " + buf + "]";
        bool first = true;
        for (std::size_t k = 0; k < model.class_ids.size(); ++k) {
            if (rule.coefficients[k] == 0.0) {
                continue;
            }
            std::snprintf(buf, sizeof buf, "%+.4g", rule.coefficients[k]);
            out += (first ? "  " : ", ") + model.class_ids[k] + " " + buf;
            first = false;
        }
        out += '\n';
    }
    return out;
}

nlohmann::json explain_json(const RuleModel& model, std::size_t top_k, ExplainOrder order) {
    auto rules = nlohmann::json::array();
    for (const auto& rule : explain(model, top_k, order)) {
        nlohmann::json coefs = nlohmann::json::object();
        for (std::size_t k = 0; k < model.class_ids.size(); ++k) {
            coefs[model.class_ids[k]] = rule.coefficients[k];
        }
        rules.push_back({{"rule", rule.render()}, {"support", rule.support}, {"coefficients", coefs}});
    }
    return {{"order", order == ExplainOrder::support ? "support" : "coefficient"},
            {"intercept_only", model.intercept_only},
            {"rules", rules}};
}

nlohmann::json to_json(const RuleModel& model) {
    auto per_class = [&](const std::vector<double>& values) {
        nlohmann::json j = nlohmann::json::object();
        for (std::size_t k = 0; k < model.class_ids.size(); ++k) {
            j[model.class_ids[k]] = values[k];
        }
        return j;
    };
    auto rules = nlohmann::json::array();
    for (const auto& rule : model.rules) {
        auto conjuncts = nlohmann::json::array();
        for (const auto& c : rule.conjuncts) {
            conjuncts.push_back({{"feature", c.feature}, {"op", op_symbol(c.op)}, {"threshold", c.threshold}});
        }
        rules.push_back({{"rule", rule.render()},
                         {"conjuncts", conjuncts},
                         {"support", rule.support},
                         {"coefficients", per_class(rule.coefficients)}});
    }
    auto terms = nlohmann::json::array();
    for (const auto& t : model.linear_terms) {
        terms.push_back({{"feature", t.feature},
                         {"lower", t.lower},
                         {"upper", t.upper},
                         {"mean", t.mean},
                         {"std_dev", t.std_dev},
                         {"coefficients", per_class(t.coefficients)}});
    }
    return {{"format_version", kFormatVersion},
            {"catalog_version", model.catalog_version},
            {"feature_names", model.feature_names},
            {"class_ids", model.class_ids},
            {"intercepts", per_class(model.intercepts)},
            {"intercept_only", model.intercept_only},
            {"rules", rules},
            {"linear_terms", terms}};
}

RuleModel rule_model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kFormatVersion) {
            throw DataError("rulefit", "unsupported rule model format_version " + j.at("format_version").dump());
        }
        RuleModel model;
        model.catalog_version = j.at("catalog_version").get<std::string>();
        model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        model.class_ids = j.at("class_ids").get<std::vector<std::string>>();
        model.intercept_only = j.at("intercept_only").get<bool>();
        auto per_class = [&](const nlohmann::json& obj) {
            std::vector<double> values;
            for (const auto& id : model.class_ids) {
                values.push_back(obj.at(id).get<double>());
            }
            return values;
        };
        auto index_of = [&](const std::string& name) {
            const auto it = std::find(model.feature_names.begin(), model.feature_names.end(), name);
            if (it == model.feature_names.end()) {
                throw DataError("rulefit", "rule refers to unknown feature '" + name + "'");
            }
            return static_cast<std::size_t>(it - model.feature_names.begin());
        };
        model.intercepts = per_class(j.at("intercepts"));
        for (const auto& r : j.at("rules")) {
            Rule rule;
            for (const auto& c : r.at("conjuncts")) {
                Conjunct conjunct;
                conjunct.feature = c.at("feature").get<std::string>();
                conjunct.feature_index = index_of(conjunct.feature);
                const auto op = c.at("op").get<std::string>();
                if (op != "<=" && op != ">") {
                    throw DataError("rulefit", "unknown comparison '" + op + "'");
                }
                conjunct.op = op == "<=" ? Comparison::less_equal : Comparison::greater;
                conjunct.threshold = c.at("threshold").get<double>();
                rule.conjuncts.push_back(std::move(conjunct));
            }
            rule.support = r.at("support").get<double>();
            rule.coefficients = per_class(r.at("coefficients"));
            model.rules.push_back(std::move(rule));
        }
        for (const auto& t : j.at("linear_terms")) {
            LinearTerm term;
            term.feature = t.at("feature").get<std::string>();
            term.feature_index = index_of(term.feature);
            term.lower = t.at("lower").get<double>();
            term.upper = t.at("upper").get<double>();
            term.mean = t.at("mean").get<double>();
            term.std_dev = t.at("std_dev").get<double>();
            term.coefficients = per_class(t.at("coefficients"));
            model.linear_terms.push_back(std::move(term));
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("rulefit", std::string("malformed rule model: ") + e.what());
    }
}

}  // namespace regimecast
