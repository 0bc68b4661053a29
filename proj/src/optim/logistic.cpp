#include "regimecast/optim/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

constexpr const char* kModule = "optim";
constexpr double kMinWeight = 1e-5;
constexpr int kMaxInnerSweeps = 500;
constexpr int kMaxHalvings = 40;

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double soft_threshold(double z, double gamma) {
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

double mean_loss(std::span<const double> eta, std::span<const int> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        acc += softplus(eta[i]) - (y[i] == 1 ? eta[i] : 0.0);
    }
    return acc / static_cast<double>(eta.size());
}

double l1_norm(std::span<const double> w) {
    return std::accumulate(w.begin(), w.end(), 0.0, [](double a, double v) { return a + std::abs(v); });
}

void linear_predictor(const SparseDesign& x, std::span<const double> w, double b, std::vector<double>& eta) {
    eta.assign(x.n_rows, b);
    for (std::size_t j = 0; j < x.columns.size(); ++j) {
        if (w[j] == 0.0) {
            continue;
        }
        const auto& col = x.columns[j];
        for (std::size_t k = 0; k < col.rows.size(); ++k) {
            eta[col.rows[k]] += w[j] * col.value(k);
        }
    }
}

}  // namespace

SparseDesign SparseDesign::from_dense(const Matrix& x) {
    SparseDesign d;
    d.n_rows = x.rows();
    d.columns.resize(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        auto& col = d.columns[j];
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (x(i, j) != 0.0) {
                col.rows.push_back(i);
                col.values.push_back(x(i, j));
            }
        }
    }
    return d;
}

double l1_logistic_objective(const SparseDesign& x, std::span<const int> y, std::span<const double> weights,
                             double intercept, double c) {
    std::vector<double> eta;
    linear_predictor(x, weights, intercept, eta);
    return mean_loss(eta, y) + l1_norm(weights) / c;
}

LinearFit fit_l1_logistic(const Matrix& x, std::span<const int> y, const LogisticSpec& spec) {
    return fit_l1_logistic(SparseDesign::from_dense(x), y, spec);
}

LinearFit fit_l1_logistic(const SparseDesign& x, std::span<const int> y, const LogisticSpec& spec) {
    if (!(spec.c > 0.0) || !(spec.tol > 0.0) || spec.max_iters < 1) {
        throw ConfigError(kModule, "logistic regression needs c > 0, tol > 0 and max_iters >= 1");
    }
    const std::size_t n = x.n_rows;
    if (n == 0 || y.size() != n) {
        throw DataError(kModule, "logistic design and labels disagree in row count");
    }
    std::size_t positives = 0;
    for (int label : y) {
        if (label != 0 && label != 1) {
            throw DataError(kModule, "logistic labels must be 0 or 1");
        }
        positives += static_cast<std::size_t>(label);
    }
    if (positives == 0 || positives == n) {
        throw DataError(kModule, "logistic regression needs both classes present");
    }
    for (const auto& col : x.columns) {
        for (double v : col.values) {
            if (!std::isfinite(v)) {
                throw DataError(kModule, "non-finite value in logistic design");
            }
        }
    }

    const std::size_t p = x.columns.size();
    const double nd = static_cast<double>(n);
    const double lambda = 1.0 / spec.c;
    const double base_rate = static_cast<double>(positives) / nd;

    std::vector<double> w(p, 0.0);
    double b = std::log(base_rate / (1.0 - base_rate));
    std::vector<double> eta;
    linear_predictor(x, w, b, eta);
    double current = mean_loss(eta, y) + lambda * l1_norm(w);

    LinearFit fit;
    fit.objective_history.push_back(current);

    std::vector<double> weight(n);
    std::vector<double> resid(n);
    std::vector<double> curvature(p);
    std::vector<double> w_new(p);
    std::vector<double> eta_trial(n);
    std::vector<double> w_trial(p);

    for (int iter = 1; iter <= spec.max_iters; ++iter) {
        fit.iterations_used = iter;
        double weight_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double prob = sigmoid(eta[i]);
            weight[i] = std::max(prob * (1.0 - prob), kMinWeight);
            resid[i] = (static_cast<double>(y[i]) - prob) / weight[i];
            weight_sum += weight[i];
        }
        for (std::size_t j = 0; j < p; ++j) {
            const auto& col = x.columns[j];
            double h = 0.0;
            for (std::size_t k = 0; k < col.rows.size(); ++k) {
                const double v = col.value(k);
                h += weight[col.rows[k]] * v * v;
            }
            curvature[j] = h / nd;
        }

        // Coordinate descent on the weighted quadratic model.
        w_new = w;
        double b_new = b;
        auto update_coordinate = [&](std::size_t j) {
            if (!(curvature[j] > 0.0)) {
                return 0.0;
            }
            const auto& col = x.columns[j];
            double g = 0.0;
            for (std::size_t k = 0; k < col.rows.size(); ++k) {
                const std::size_t i = col.rows[k];
                g += weight[i] * col.value(k) * resid[i];
            }
            g = g / nd + curvature[j] * w_new[j];
            const double updated = soft_threshold(g, lambda) / curvature[j];
            const double delta = updated - w_new[j];
            if (delta != 0.0) {
                for (std::size_t k = 0; k < col.rows.size(); ++k) {
                    resid[col.rows[k]] -= col.value(k) * delta;
                }
                w_new[j] = updated;
            }
            return std::abs(delta);
        };
        auto update_intercept = [&] {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += weight[i] * resid[i];
            }
            const double delta = acc / weight_sum;
            for (double& r : resid) {
                r -= delta;
            }
            b_new += delta;
            return std::abs(delta);
        };

        for (int sweep = 0; sweep < kMaxInnerSweeps; ++sweep) {
            double full_change = update_intercept();
            for (std::size_t j = 0; j < p; ++j) {
                full_change = std::max(full_change, update_coordinate(j));
            }
            if (full_change < spec.tol) {
                break;
            }
            std::vector<std::size_t> active;
            for (std::size_t j = 0; j < p; ++j) {
                if (w_new[j] != 0.0) {
                    active.push_back(j);
                }
            }
            for (int inner = 0; inner < kMaxInnerSweeps; ++inner) {
                double change = update_intercept();
                for (std::size_t j : active) {
                    change = std::max(change, update_coordinate(j));
                }
                if (change < spec.tol) {
                    break;
                }
            }
        }

        // Backtracking along the proximal Newton direction.
        double step = 1.0;
        bool accepted = false;
        double trial_obj = current;
        double b_trial = b;
        for (int h = 0; h < kMaxHalvings; ++h) {
            for (std::size_t j = 0; j < p; ++j) {
                w_trial[j] = w[j] + step * (w_new[j] - w[j]);
            }
            b_trial = b + step * (b_new - b);
            linear_predictor(x, w_trial, b_trial, eta_trial);
            trial_obj = mean_loss(eta_trial, y) + lambda * l1_norm(w_trial);
            if (trial_obj <= current) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            fit.converged = true;
            break;
        }

        double max_change = std::abs(b_trial - b);
        for (std::size_t j = 0; j < p; ++j) {
            max_change = std::max(max_change, std::abs(w_trial[j] - w[j]));
        }
        w = w_trial;
        b = b_trial;
        eta.swap(eta_trial);
        current = trial_obj;
        fit.objective_history.push_back(current);
        if (max_change < spec.tol) {
            fit.converged = true;
            break;
        }
    }

    fit.weights = std::move(w);
    fit.intercept = b;
    fit.final_objective = current;
    return fit;
}

}  // namespace regimecast
