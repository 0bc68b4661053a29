#include "regimecast/rulefit/trees.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "regimecast/core/error.hpp"
#include "regimecast/featurizer/features.hpp"

namespace regimecast {
namespace {

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

/// Per-feature row order by value, missing values excluded. Shared by all
/// nodes of a tree (and all trees of an ensemble).
using SortedColumns = std::vector<std::vector<std::size_t>>;

SortedColumns sort_columns(const Matrix& x) {
    SortedColumns sorted(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        auto& order = sorted[j];
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (!is_missing(x(i, j))) {
                order.push_back(i);
            }
        }
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, j) < x(b, j); });
    }
    return sorted;
}

/// Shortest decimal t with lo <= t < hi, so rendered rules stay readable.
double split_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    for (int digits = 1; digits <= 17; ++digits) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.*g", digits, mid);
        const double t = std::strtod(buf, nullptr);
        if (lo <= t && t < hi) {
            return t;
        }
    }
    return (mid >= hi) ? lo : mid;
}

/// Best least-squares split among rows whose node id equals `node`.
Split best_split(const Matrix& x, std::span<const double> target, const SortedColumns& sorted,
                 const std::vector<int>& node_of_row, int node, std::size_t min_leaf) {
    Split best;
    std::vector<std::size_t> members;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        members.clear();
        double total = 0.0;
        for (std::size_t i : sorted[j]) {
            if (node_of_row[i] == node) {
                members.push_back(i);
                total += target[i];
            }
        }
        const std::size_t count = members.size();
        if (count < 2 * min_leaf) {
            continue;
        }
        const double base = total * total / static_cast<double>(count);
        double left_sum = 0.0;
        for (std::size_t k = 0; k + 1 < count; ++k) {
            left_sum += target[members[k]];
            const std::size_t left_n = k + 1;
            const double lo = x(members[k], j);
            const double hi = x(members[k + 1], j);
            if (left_n < min_leaf || count - left_n < min_leaf || !(lo < hi)) {
                continue;
            }
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                                right_sum * right_sum / static_cast<double>(count - left_n) - base;
            if (gain > best.gain + 1e-12) {
                best = {static_cast<int>(j), split_threshold(lo, hi), gain};
            }
        }
    }
    return best;
}

RegressionTree grow_tree(const Matrix& x, std::span<const double> target, const SortedColumns& sorted,
                         const TreeParams& params, std::span<const std::size_t> rows) {
    RegressionTree tree;
    std::vector<int> node_of_row(x.rows(), -1);
    double sum = 0.0;
    for (std::size_t i : rows) {
        node_of_row[i] = 0;
        sum += target[i];
    }
    TreeNode root;
    root.samples = rows.size();
    root.value = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
    tree.nodes.push_back(root);

    for (std::size_t current = 0; current < tree.nodes.size(); ++current) {
        if (tree.nodes[current].depth >= params.max_depth) {
            continue;
        }
        const auto node = static_cast<int>(current);
        const Split split = best_split(x, target, sorted, node_of_row, node, params.min_samples_leaf);
        if (split.feature < 0) {
            continue;
        }
        TreeNode left;
        TreeNode right;
        left.parent = right.parent = node;
        left.depth = right.depth = tree.nodes[current].depth + 1;
        double left_sum = 0.0;
        double right_sum = 0.0;
        const int left_id = static_cast<int>(tree.nodes.size());
        const int right_id = left_id + 1;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (node_of_row[i] != node) {
                continue;
            }
            const double v = x(i, static_cast<std::size_t>(split.feature));
            if (is_missing(v)) {
                continue;
            }
            if (v <= split.threshold) {
                node_of_row[i] = left_id;
                left_sum += target[i];
                ++left.samples;
            } else {
                node_of_row[i] = right_id;
                right_sum += target[i];
                ++right.samples;
            }
        }
        left.value = left_sum / static_cast<double>(left.samples);
        right.value = right_sum / static_cast<double>(right.samples);
        tree.nodes[current].feature = split.feature;
        tree.nodes[current].threshold = split.threshold;
        tree.nodes[current].left = left_id;
        tree.nodes[current].right = right_id;
        tree.nodes.push_back(left);
        tree.nodes.push_back(right);
    }
    return tree;
}

}  // namespace

double RegressionTree::predict(std::span<const double> row) const {
    std::size_t current = 0;
    for (;;) {
        const auto& node = nodes[current];
        if (node.is_leaf()) {
            return node.value;
        }
        const double v = row[static_cast<std::size_t>(node.feature)];
        if (is_missing(v)) {
            return node.value;
        }
        current = static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
    }
}

RegressionTree fit_regression_tree(const Matrix& x, std::span<const double> target, const TreeParams& params,
                                   std::span<const std::size_t> rows) {
    if (target.size() != x.rows()) {
        throw DataError("rulefit", "tree target length differs from row count");
    }
    std::vector<std::size_t> all;
    if (rows.empty()) {
        all.resize(x.rows());
        std::iota(all.begin(), all.end(), 0);
        rows = all;
    }
    return grow_tree(x, target, sort_columns(x), params, rows);
}

std::vector<RegressionTree> fit_boosted_trees(const Matrix& x, std::span<const double> target,
                                              const BoostingParams& params, Rng& rng) {
    if (target.size() != x.rows() || x.rows() == 0) {
        throw DataError("rulefit", "boosting target length differs from row count");
    }
    const std::size_t n = x.rows();
    const auto sorted = sort_columns(x);
    const TreeParams tree_params{params.max_depth, params.min_samples_leaf};
    const auto sample_size = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n))), 1, n);

    const double base = std::accumulate(target.begin(), target.end(), 0.0) / static_cast<double>(n);
    std::vector<double> fitted(n, base);
    std::vector<double> residual(n);
    std::vector<RegressionTree> trees;
    trees.reserve(static_cast<std::size_t>(params.n_trees));
    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = target[i] - fitted[i];
        }
        auto rows = rng.sample_without_replacement(n, sample_size);
        std::sort(rows.begin(), rows.end());
        auto tree = grow_tree(x, residual, sorted, tree_params, rows);
        for (std::size_t i = 0; i < n; ++i) {
            fitted[i] += params.learning_rate * tree.predict(x.row(i));
        }
        trees.push_back(std::move(tree));
    }
    return trees;
}

}  // namespace regimecast
