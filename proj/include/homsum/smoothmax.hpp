#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace homsum {

// beta^{-1} log sum_j exp(beta x_j), shifted by max x before exponentiating.
double phi_beta(std::span<const double> x, double beta);

inline constexpr int kDerivativeDimCap = 100;

// Derivatives of phi_beta up to `order`, in softmax weights pi:
//   d_j = pi_j, d_jk = beta (pi_j 1{j=k} - pi_j pi_k), d_jkl as the next product-rule step.
struct PhiDerivatives {
    double value = 0.0;
    Eigen::VectorXd pi;
    Eigen::MatrixXd hessian;    // order >= 2
    std::vector<double> third;  // order 3, d^3 entries, row-major
    double third_at(int j, int k, int l) const {
        const auto d = static_cast<std::size_t>(pi.size());
        return third[(j * d + k) * d + l];
    }
};
PhiDerivatives phi_derivatives(std::span<const double> x, double beta, int order, int cap = kDerivativeDimCap);

// Smooth cutoff: 1 for t <= 0, 0 for t >= 1, f0(1-t) / (f0(t) + f0(1-t)) with
// f0(t) = exp(-1/t) in between.
double g0(double t);
// k-th derivative, k <= 3, in closed form through the logistic representation
// g0 = 1 / (1 + exp(1/(1-t) - 1/t)).
double g0_derivative(double t, int k);
// sup_t |g0^{(k)}(t)| over a uniform grid with `grid` cells refined around the
// best cell. The default grid is cached.
double g0_derivative_sup(int k);
double g0_derivative_sup(int k, int grid);

// h(t) = g0(scale t + shift).
struct Cutoff {
    double scale = 1.0;
    double shift = 0.0;
    double operator()(double t) const { return g0(scale * t + shift); }
    double derivative(double t, int k) const;
    double derivative_sup(int k) const;
};

struct DerivativeSumCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds(double rel_slack = 1e-12) const { return lhs <= rhs * (1.0 + rel_slack); }
};
inline constexpr double kDerivativeSumConstants[] = {1.0, 3.0, 13.0};
// lhs = sum over j_1..j_m of |d^m (h o phi_beta)(x)|, rhs = c_m max_k beta^{m-k} ||h^{(k)}||.
DerivativeSumCheck derivative_sum_bound_check(const Cutoff& h, double beta, std::span<const double> x, int m);

// Per-coordinate quantiles of the pooled samples, combined into a product grid;
// beyond `cap` points a seeded random subset of the product is kept. Columns are
// grid points.
Eigen::MatrixXd pooled_quantile_grid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int levels,
                                     std::size_t cap = 10000, std::uint64_t seed = 0);

struct SmoothDistance {
    double estimate = 0.0;
    double se = 0.0;
};
// max over grid points y of |E g0(phi_beta(F - y)/eps) - E g0(phi_beta(Z - y)/eps)|
// with beta = log d / eps (beta = 1/eps when d = 1).
SmoothDistance delta_epsilon_estimate(const Eigen::MatrixXd& f, const Eigen::MatrixXd& z, double eps,
                                      const Eigen::MatrixXd& grid, unsigned threads = 1);

struct AntiConcentration {
    double lhs = 0.0;  // P(Z <= x + eps) - P(Z <= x)
    double se = 0.0;
    double rhs = 0.0;  // (eps / sigma_min) (sqrt(2 log d) + 2)
    bool holds() const { return lhs <= rhs + 3.0 * se; }
};
AntiConcentration nazarov_check(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& x, double eps,
                                std::size_t mc, std::uint64_t seed, unsigned threads = 1);

}  // namespace homsum
