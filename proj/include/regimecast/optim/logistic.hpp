#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "regimecast/core/matrix.hpp"
#include "regimecast/optim/elastic_net.hpp"

namespace regimecast {

/// Column-oriented sparse design: each column lists its non-zero rows.
/// Rule indicators are stored with an empty `values` (all ones).
struct SparseColumn {
    std::vector<std::size_t> rows;
    std::vector<double> values;

    [[nodiscard]] double value(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }
};

struct SparseDesign {
    std::size_t n_rows = 0;
    std::vector<SparseColumn> columns;

    static SparseDesign from_dense(const Matrix& x);
};

struct LogisticSpec {
    /// Inverse regularization strength: the L1 weight is 1 / c.
    double c = 1.0;
    int max_iters = 100;
    double tol = 1e-6;
};

/// Minimizes mean logistic loss + (1/c) * ||w||_1 with an unpenalized
/// intercept, by proximal Newton steps (weighted-least-squares coordinate
/// descent on the local quadratic model) with backtracking so the objective
/// never increases between outer iterations. Labels are 0/1.
LinearFit fit_l1_logistic(const SparseDesign& x, std::span<const int> y, const LogisticSpec& spec);
LinearFit fit_l1_logistic(const Matrix& x, std::span<const int> y, const LogisticSpec& spec);

/// Mean logistic loss + (1/c) * ||w||_1.
double l1_logistic_objective(const SparseDesign& x, std::span<const int> y, std::span<const double> weights,
                             double intercept, double c);

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace regimecast
