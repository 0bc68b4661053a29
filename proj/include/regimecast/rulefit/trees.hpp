#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "regimecast/core/matrix.hpp"
#include "regimecast/core/random.hpp"

namespace regimecast {

/// Rows go left when `value <= threshold`, right when `value > threshold`.
/// A row whose split feature is missing stops at the node, so every node's
/// sample set is exactly the rows satisfying its path conjuncts.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int parent = -1;
    int depth = 0;
    double value = 0.0;
    std::size_t samples = 0;

    [[nodiscard]] bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  ///< nodes[0] is the root

    [[nodiscard]] double predict(std::span<const double> row) const;
};

struct TreeParams {
    int max_depth = 3;
    std::size_t min_samples_leaf = 5;
};

/// Least-squares regression tree on the given rows (all rows if empty).
RegressionTree fit_regression_tree(const Matrix& x, std::span<const double> target, const TreeParams& params,
                                   std::span<const std::size_t> rows = {});

struct BoostingParams {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double subsample = 0.75;
    std::size_t min_samples_leaf = 5;
};

/// Squared-error gradient boosting. Each tree is fit to the current
/// residuals on a subsample drawn without replacement.
std::vector<RegressionTree> fit_boosted_trees(const Matrix& x, std::span<const double> target,
                                              const BoostingParams& params, Rng& rng);

}  // namespace regimecast
