#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "regimecast/core/error.hpp"
#include "regimecast/core/random.hpp"
#include "regimecast/optim/elastic_net.hpp"
#include "regimecast/optim/logistic.hpp"

namespace regimecast {
namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

// Centers each column and scales it to unit population variance.
void standardize_columns(Matrix& x) {
    const double n = static_cast<double>(x.rows());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) mean += x(r, c) / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) ss += (x(r, c) - mean) * (x(r, c) - mean);
        const double sd = std::sqrt(ss / n);
        for (std::size_t r = 0; r < x.rows(); ++r) x(r, c) = (x(r, c) - mean) / sd;
    }
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix x(rows, cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) x(r, c) = rng.normal();
    return x;
}

// Solves A z = b by Gaussian elimination with partial pivoting.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    std::vector<double> z(n);
    for (std::size_t k = n; k-- > 0;) {
        double acc = b[k];
        for (std::size_t j = k + 1; j < n; ++j) acc -= a[k][j] * z[j];
        z[k] = acc / a[k][k];
    }
    return z;
}

// OLS with intercept through the normal equations of [1, X].
std::vector<double> ols_oracle(const Matrix& x, const std::vector<double>& y) {
    const std::size_t p = x.cols() + 1;
    std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
    std::vector<double> b(p, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> row{1.0};
        for (double v : x.row(r)) row.push_back(v);
        for (std::size_t i = 0; i < p; ++i) {
            b[i] += row[i] * y[r];
            for (std::size_t j = 0; j < p; ++j) a[i][j] += row[i] * row[j];
        }
    }
    return solve(a, b);
}

// Gradient of the smooth part (squared loss plus L2 penalty) in w.
std::vector<double> smooth_gradient(const Matrix& x, const std::vector<double>& y, const std::vector<double>& w,
                                    double b, const ElasticNetSpec& spec) {
    const double n = static_cast<double>(x.rows());
    std::vector<double> g(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double resid = y[r] - b;
        for (std::size_t c = 0; c < x.cols(); ++c) resid -= x(r, c) * w[c];
        for (std::size_t c = 0; c < x.cols(); ++c) g[c] -= x(r, c) * resid / n;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) g[c] += spec.alpha * (1.0 - spec.l1_ratio) * w[c];
    return g;
}

double logistic_loss_gradient(const Matrix& x, const std::vector<int>& y, const std::vector<double>& w, double b,
                              std::size_t j) {
    double g = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double eta = b;
        for (std::size_t c = 0; c < x.cols(); ++c) eta += x(r, c) * w[c];
        const double xv = j == x.cols() ? 1.0 : x(r, j);
        g += (sigmoid(eta) - y[r]) * xv;
    }
    return g / static_cast<double>(x.rows());
}

TEST(ElasticNetTest, PureOlsLine) {
    const auto x = Matrix::from_rows({{1}, {2}});
    const std::vector<double> y{2, 4};
    const auto fit = fit_elastic_net(x, y, {0.0, 0.5, 10000, 1e-12}, ColumnScaling::standardize_internally);
    EXPECT_NEAR(fit.weights[0], 2.0, 1e-10);
    EXPECT_NEAR(fit.intercept, 0.0, 1e-10);
}

TEST(ElasticNetTest, WeakCorrelationIsZeroed) {
    auto x = Matrix::from_rows({{1}, {-1}, {1}, {-1}});
    const std::vector<double> y{0.1, 0.1, 0.0, 0.2};  // <x,y>/n = -0.05
    const auto fit = fit_elastic_net(x, y, {0.9, 0.7});
    EXPECT_EQ(fit.weights[0], 0.0);
    EXPECT_NEAR(fit.intercept, 0.1, 1e-12);
}

TEST(ElasticNetTest, UnivariateSoftThresholdOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 5 + rng.uniform_index(40);
        auto x = random_matrix(rng, n, 1);
        standardize_columns(x);
        std::vector<double> y(n);
        const double beta = rng.normal(0.0, 2.0);
        for (std::size_t i = 0; i < n; ++i) y[i] = beta * x(i, 0) + rng.normal() + 3.0;
        const ElasticNetSpec spec{rng.uniform() * 2.0, rng.uniform(), 10000, 1e-10};
        double xy = 0.0;
        double ybar = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            xy += x(i, 0) * y[i] / static_cast<double>(n);
            ybar += y[i] / static_cast<double>(n);
        }
        const double expected =
            soft_threshold(xy, spec.alpha * spec.l1_ratio) / (1.0 + spec.alpha * (1.0 - spec.l1_ratio));
        const auto fit = fit_elastic_net(x, y, spec);
        EXPECT_NEAR(fit.weights[0], expected, 1e-8);
        EXPECT_NEAR(fit.intercept, ybar, 1e-8);
    }
}

TEST(ElasticNetTest, AlphaZeroMatchesNormalEquations) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const auto x = random_matrix(rng, 5, 3);
        std::vector<double> y(5);
        for (auto& v : y) v = rng.normal(0.0, 3.0);
        const auto expected = ols_oracle(x, y);
        const auto fit = fit_elastic_net(x, y, {0.0, 0.5, 1000000, 1e-14}, ColumnScaling::standardize_internally);
        EXPECT_NEAR(fit.intercept, expected[0], 1e-8);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(fit.weights[j], expected[j + 1], 1e-8);
    }
}

TEST(ElasticNetTest, OlsScalesWithResponse) {
    Rng rng(3);
    const auto x = random_matrix(rng, 8, 3);
    std::vector<double> y(8);
    for (auto& v : y) v = rng.normal();
    const double k = -3.5;
    std::vector<double> ky;
    for (double v : y) ky.push_back(k * v);
    const ElasticNetSpec spec{0.0, 0.5, 1000000, 1e-14};
    const auto a = fit_elastic_net(x, y, spec, ColumnScaling::standardize_internally);
    const auto b = fit_elastic_net(x, ky, spec, ColumnScaling::standardize_internally);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(b.weights[j], k * a.weights[j], 1e-9 * std::abs(k * a.weights[j]) + 1e-12);
}

TEST(ElasticNetTest, KktAndDescentProperty) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 10 + rng.uniform_index(30);
        const std::size_t p = 1 + rng.uniform_index(6);
        auto x = random_matrix(rng, n, p);
        standardize_columns(x);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.normal();
            for (std::size_t j = 0; j < p; ++j) y[i] += (j % 2 == 0 ? 1.5 : 0.0) * x(i, j);
        }
        const ElasticNetSpec spec{rng.uniform() * 1.5, rng.uniform(), 10000, 1e-6};
        const auto fit = fit_elastic_net(x, y, spec);
        ASSERT_TRUE(fit.converged);
        const auto g = smooth_gradient(x, y, fit.weights, fit.intercept, spec);
        const double l1 = spec.alpha * spec.l1_ratio;
        for (std::size_t j = 0; j < p; ++j) {
            ASSERT_TRUE(std::isfinite(fit.weights[j]));
            if (fit.weights[j] == 0.0) {
                EXPECT_LE(std::abs(g[j]), l1 + 10 * spec.tol);
            } else {
                EXPECT_LE(std::abs(g[j] + l1 * (fit.weights[j] > 0 ? 1.0 : -1.0)), 10 * spec.tol);
            }
        }
        for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
            EXPECT_LE(fit.objective_history[k], fit.objective_history[k - 1] + 1e-12);
        }
    }
}

TEST(ElasticNetTest, SmoothGradientMatchesFiniteDifferences) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 6 + rng.uniform_index(10);
        const std::size_t p = 1 + rng.uniform_index(4);
        const auto x = random_matrix(rng, n, p);
        std::vector<double> y(n);
        for (auto& v : y) v = rng.normal();
        std::vector<double> w(p);
        for (auto& v : w) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.1 + rng.uniform());
        const double b = rng.normal();
        const ElasticNetSpec spec{rng.uniform(), rng.uniform()};
        auto smooth = [&](const std::vector<double>& ww) {
            double l1 = 0.0;
            for (double v : ww) l1 += std::abs(v);
            return elastic_net_objective(x, y, ww, b, spec) - spec.alpha * spec.l1_ratio * l1;
        };
        const auto g = smooth_gradient(x, y, w, b, spec);
        const double h = 1e-6;
        for (std::size_t j = 0; j < p; ++j) {
            auto up = w;
            auto down = w;
            up[j] += h;
            down[j] -= h;
            const double fd = (smooth(up) - smooth(down)) / (2 * h);
            EXPECT_LE(std::abs(fd - g[j]), 1e-4 * std::max(1.0, std::abs(g[j])));
        }
    }
}

TEST(ElasticNetTest, SpecValidation) {
    EXPECT_THROW((ElasticNetSpec{0.9, 1.5}.validate()), ConfigError);
    EXPECT_THROW((ElasticNetSpec{-1.0, 0.5}.validate()), ConfigError);
    EXPECT_THROW((ElasticNetSpec{1.0, 0.5, 100, 0.0}.validate()), ConfigError);
    const auto x = Matrix::from_rows({{1}, {2}});
    EXPECT_THROW(fit_elastic_net(x, std::vector<double>{1.0}, {}), DataError);
}

TEST(LogisticTest, SeparableDirection) {
    Matrix x(40, 1);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        const bool pos = i % 2 == 0;
        x(i, 0) = (pos ? -2.0 : 2.0) + 0.01 * static_cast<double>(i);
        y[i] = pos ? 1 : 0;
    }
    const auto fit = fit_l1_logistic(x, y, {1000.0, 100, 1e-8});
    EXPECT_LT(fit.weights[0], 0.0);
    EXPECT_GT(sigmoid(fit.weights[0] * -2.0 + fit.intercept), 0.9);
}

TEST(LogisticTest, TinyCGivesBaseRate) {
    Rng rng(6);
    const auto x = random_matrix(rng, 50, 3);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) y[i] = x(i, 0) > 0.3 ? 1 : 0;
    const auto fit = fit_l1_logistic(x, y, {1e-6, 100, 1e-8});
    double rate = 0.0;
    for (int v : y) rate += v / 50.0;
    for (double w : fit.weights) EXPECT_EQ(w, 0.0);
    EXPECT_NEAR(sigmoid(fit.intercept), rate, 1e-9);
}

TEST(LogisticTest, NoiseWeightZeroBelowBisectedThreshold) {
    Rng rng(7);
    const std::size_t n = 200;
    Matrix x(n, 2);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.normal();
        x(i, 1) = rng.normal();
        y[i] = rng.uniform() < sigmoid(1.5 * x(i, 0)) ? 1 : 0;
    }
    auto noise_active = [&](double c) { return fit_l1_logistic(x, y, {c, 200, 1e-10}).weights[1] != 0.0; };
    double lo = 1e-3;
    double hi = 1e4;
    ASSERT_FALSE(noise_active(lo));
    ASSERT_TRUE(noise_active(hi));
    for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        (noise_active(mid) ? hi : lo) = mid;
    }
    for (double f : {0.05, 0.2, 0.5, 0.9, 0.99}) {
        EXPECT_EQ(fit_l1_logistic(x, y, {lo * f, 200, 1e-10}).weights[1], 0.0) << f;
    }
}

TEST(LogisticTest, KktAndMonotoneObjective) {
    Rng rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 30 + rng.uniform_index(50);
        const std::size_t p = 1 + rng.uniform_index(4);
        const auto x = random_matrix(rng, n, p);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform() < sigmoid(x(i, 0) - 0.5 * x(i, p - 1)) ? 1 : 0;
        const LogisticSpec spec{0.5 + 20.0 * rng.uniform(), 200, 1e-10};
        const auto fit = fit_l1_logistic(x, y, spec);
        for (std::size_t k = 1; k < fit.objective_history.size(); ++k) {
            EXPECT_LE(fit.objective_history[k], fit.objective_history[k - 1]);
        }
        EXPECT_NEAR(logistic_loss_gradient(x, y, fit.weights, fit.intercept, p), 0.0, 1e-6);
        for (std::size_t j = 0; j < p; ++j) {
            const double g = logistic_loss_gradient(x, y, fit.weights, fit.intercept, j);
            if (fit.weights[j] == 0.0) {
                EXPECT_LE(std::abs(g), 1.0 / spec.c + 1e-6);
            } else {
                EXPECT_NEAR(g + (fit.weights[j] > 0 ? 1.0 : -1.0) / spec.c, 0.0, 1e-6);
            }
        }
    }
}

TEST(LogisticTest, SparseAndDenseAgree) {
    Matrix x(6, 2);
    const std::vector<int> y{1, 0, 1, 0, 1, 1};
    for (std::size_t i = 0; i < 6; ++i) {
        x(i, 0) = i % 2 == 0 ? 1.0 : 0.0;
        x(i, 1) = i < 3 ? 1.0 : 0.0;
    }
    SparseDesign sparse{6, {{{0, 2, 4}, {}}, {{0, 1, 2}, {}}}};
    const auto a = fit_l1_logistic(x, y, {5.0});
    const auto b = fit_l1_logistic(sparse, y, {5.0});
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.intercept, b.intercept);
}

TEST(LogisticTest, RejectsSingleClass) {
    const auto x = Matrix::from_rows({{1}, {2}});
    EXPECT_THROW(fit_l1_logistic(x, std::vector<int>{1, 1}, {}), DataError);
    EXPECT_THROW(fit_l1_logistic(x, std::vector<int>{1, 0}, {0.0}), ConfigError);
}

}  // namespace
}  // namespace regimecast
