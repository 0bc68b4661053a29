#include "regimecast/optim/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "regimecast/core/error.hpp"

namespace regimecast {
namespace {

constexpr const char* kModule = "optim";

double soft_threshold(double z, double gamma) {
    if (z > gamma) {
        return z - gamma;
    }
    if (z < -gamma) {
        return z + gamma;
    }
    return 0.0;
}

void check_inputs(const Matrix& x, std::span<const double> y) {
    if (x.cols() == 0) {
        throw DataError(kModule, "design matrix has no columns");
    }
    if (x.rows() < 2) {
        throw DataError(kModule, "at least 2 rows are required");
    }
    if (x.rows() != y.size()) {
        throw DataError(kModule, "design has " + std::to_string(x.rows()) + " rows but response has " +
                                     std::to_string(y.size()));
    }
    for (double v : x.data()) {
        if (!std::isfinite(v)) {
            throw DataError(kModule, "non-finite value in design matrix");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw DataError(kModule, "non-finite value in response");
        }
    }
}

}  // namespace

void ElasticNetSpec::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
        throw ConfigError(kModule, "elastic net alpha must be finite and >= 0");
    }
    if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) {
        throw ConfigError(kModule, "elastic net l1_ratio must lie in [0, 1], got " + std::to_string(l1_ratio));
    }
    if (!(tol > 0.0)) {
        throw ConfigError(kModule, "elastic net tol must be > 0");
    }
    if (max_iters < 1) {
        throw ConfigError(kModule, "elastic net max_iters must be >= 1");
    }
}

double elastic_net_objective(const Matrix& x, std::span<const double> y, std::span<const double> weights,
                             double intercept, const ElasticNetSpec& spec) {
    const double n = static_cast<double>(x.rows());
    double rss = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        const double pred = intercept + std::inner_product(row.begin(), row.end(), weights.begin(), 0.0);
        rss += (y[i] - pred) * (y[i] - pred);
    }
    double l1 = 0.0;
    double l2 = 0.0;
    for (double w : weights) {
        l1 += std::abs(w);
        l2 += w * w;
    }
    return rss / (2.0 * n) + spec.alpha * spec.l1_ratio * l1 + spec.alpha * (1.0 - spec.l1_ratio) / 2.0 * l2;
}

LinearFit fit_elastic_net(const Matrix& x, std::span<const double> y, const ElasticNetSpec& spec,
                          ColumnScaling scaling) {
    spec.validate();
    check_inputs(x, y);

    const std::size_t n = x.rows();
    const std::size_t p = x.cols();
    const double nd = static_cast<double>(n);

    // Column-major centered (and optionally scaled) copy.
    std::vector<std::vector<double>> cols(p, std::vector<double>(n));
    std::vector<double> col_mean(p, 0.0);
    std::vector<double> col_scale(p, 1.0);
    std::vector<double> col_sq(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        auto& c = cols[j];
        for (std::size_t i = 0; i < n; ++i) {
            c[i] = x(i, j);
        }
        col_mean[j] = std::accumulate(c.begin(), c.end(), 0.0) / nd;
        for (double& v : c) {
            v -= col_mean[j];
        }
        if (scaling == ColumnScaling::standardize_internally) {
            const double var = std::inner_product(c.begin(), c.end(), c.begin(), 0.0) / nd;
            col_scale[j] = var > 0.0 ? std::sqrt(var) : 0.0;
            if (col_scale[j] > 0.0) {
                for (double& v : c) {
                    v /= col_scale[j];
                }
            } else {
                std::fill(c.begin(), c.end(), 0.0);
            }
        }
        col_sq[j] = std::inner_product(c.begin(), c.end(), c.begin(), 0.0) / nd;
    }
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = y[i] - y_mean;
    }

    const double l1 = spec.alpha * spec.l1_ratio;
    const double l2 = spec.alpha * (1.0 - spec.l1_ratio);
    std::vector<double> w(p, 0.0);

    auto objective = [&] {
        double rss = std::inner_product(resid.begin(), resid.end(), resid.begin(), 0.0);
        double a1 = 0.0;
        double a2 = 0.0;
        for (double v : w) {
            a1 += std::abs(v);
            a2 += v * v;
        }
        return rss / (2.0 * nd) + l1 * a1 + l2 / 2.0 * a2;
    };
    auto max_kkt_residual = [&] {
        double worst = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double grad = -std::inner_product(cols[j].begin(), cols[j].end(), resid.begin(), 0.0) / nd + l2 * w[j];
            const double viol = w[j] == 0.0 ? std::max(0.0, std::abs(grad) - l1)
                                            : std::abs(grad + l1 * (w[j] > 0.0 ? 1.0 : -1.0));
            worst = std::max(worst, viol);
        }
        return worst;
    };

    LinearFit fit;
    for (int iter = 1; iter <= spec.max_iters; ++iter) {
        double max_update = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double denom = col_sq[j] + l2;
            if (!(denom > 0.0)) {
                continue;
            }
            const auto& c = cols[j];
            const double rho = std::inner_product(c.begin(), c.end(), resid.begin(), 0.0) / nd + col_sq[j] * w[j];
            const double updated = soft_threshold(rho, l1) / denom;
            const double delta = updated - w[j];
            if (delta != 0.0) {
                for (std::size_t i = 0; i < n; ++i) {
                    resid[i] -= c[i] * delta;
                }
                w[j] = updated;
                max_update = std::max(max_update, std::abs(delta));
            }
        }
        fit.objective_history.push_back(objective());
        fit.iterations_used = iter;
        if (max_update < spec.tol && max_kkt_residual() <= spec.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.final_objective = fit.objective_history.empty() ? objective() : fit.objective_history.back();

    fit.weights.assign(p, 0.0);
    fit.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) {
        const double wj = col_scale[j] > 0.0 ? w[j] / col_scale[j] : 0.0;
        fit.weights[j] = wj;
        fit.intercept -= wj * col_mean[j];
    }
    return fit;
}

}  // namespace regimecast
