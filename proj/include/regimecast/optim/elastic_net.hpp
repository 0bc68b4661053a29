#pragma once

#include <span>
#include <vector>

#include "regimecast/core/matrix.hpp"

namespace regimecast {

/// Penalty and stopping parameters for
///
///     L(w) = 1/(2n) ||y - Xw - b||^2 + alpha * l1_ratio * ||w||_1
///            + alpha * (1 - l1_ratio) / 2 * ||w||^2
///
/// with an unpenalized intercept b.
struct ElasticNetSpec {
    double alpha = 1.0;
    double l1_ratio = 0.5;
    int max_iters = 10000;
    double tol = 1e-6;

    void validate() const;
};

struct LinearFit {
    std::vector<double> weights;
    double intercept = 0.0;
    int iterations_used = 0;
    /// Objective at exit, on the scale the solver worked in.
    double final_objective = 0.0;
    /// Objective after each full coordinate cycle (or outer iteration).
    std::vector<double> objective_history;
    bool converged = false;
};

enum class ColumnScaling {
    /// Caller guarantees mean 0 / unit population variance columns.
    standardized,
    /// Columns are standardized internally and weights mapped back to the
    /// input scale. The penalty then acts on the standardized weights.
    standardize_internally,
};

/// Cyclic coordinate descent in fixed column order. Stops when the largest
/// coordinate update of a cycle falls below `tol` and every coordinate's KKT
/// residual is within `tol`, or after `max_iters` cycles.
LinearFit fit_elastic_net(const Matrix& x, std::span<const double> y, const ElasticNetSpec& spec,
                          ColumnScaling scaling = ColumnScaling::standardized);

/// Objective value of (weights, intercept) on the given data.
double elastic_net_objective(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                             double intercept, const ElasticNetSpec& spec);

}  // namespace regimecast
