#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "homsum/distributions.hpp"
#include "homsum/kernel.hpp"
#include "homsum/moments.hpp"
#include "homsum/smoothmax.hpp"

namespace homsum {

// Q(f; w) = u + w_i v, where u collects the tuples avoiding i and v the tuples
// through i with the i-th factor removed. Neither depends on w_i.
struct UVSplit {
    double u = 0.0;
    double v = 0.0;
};
UVSplit uv_split(const SymmetricKernel& f, std::span<const double> w, int i);

// The hybrid after `step` swaps along `order`: coordinates order[0..step) come
// from x, the rest from y. Step 0 is all y, step N is all x.
std::vector<double> hybrid_vector(std::span<const double> x, std::span<const double> y, std::span<const int> order,
                                  int step);
std::vector<VariableSpec> hybrid_laws(std::span<const VariableSpec> x, std::span<const VariableSpec> y,
                                      std::span<const int> order, int step);

// Lambda_i = (log d)^{(q-1)/alpha} max_k M^{q_k - 1} sqrt(Inf_i(f_k)), M the
// largest psi_alpha norm of the coordinates.
Eigen::VectorXd lambda_rates(const HomSumSystem& system, double alpha);

struct LindebergParams {
    double tau = 0.0;
    double rho = 0.0;
    double psi_bound = 0.0;  // M_N
    Eigen::VectorXd lambda;
    // tau rho M_N max_i Lambda_i <= 1 / beta
    bool constraint_holds(double beta) const;
};
// tau = tau_factor (log d^2)^{1/alpha}, rho = rho_factor (log d^2)^{(q-1)/alpha}.
LindebergParams lindeberg_params(const HomSumSystem& system, double alpha, double tau_factor = 1.0,
                                 double rho_factor = 1.0);

struct InterpolationOptions {
    Cutoff h;
    double beta = 1.0;
    // Test functionals psi_y(q) = h(phi_beta(q - y)); empty means y = 0 only.
    std::vector<Eigen::VectorXd> shifts;
    int permutations = 64;
    // Draws per permutation.
    std::size_t mc = 10000;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct InterpolationReport {
    // max_y |E psi_y(Q(X)) - E psi_y(Q(Y))| and its SE, pooled over all draws.
    double difference = 0.0;
    double difference_se = 0.0;
    int worst_shift = 0;
    // At the worst shift: per permutation, sum_i |mean step i| and the signed
    // telescoped total sum_i mean step i.
    std::vector<double> step_magnitude_sums;
    std::vector<double> permutation_totals;
    // Mean per-step magnitude, indexed by position in the swap order.
    std::vector<double> mean_step_magnitude;
    double mean_step_magnitude_sum() const;
};

// X laws come from the system, Y laws from `y_laws`. Each permutation draws an
// independent swap order and fresh (X, Y) pairs; steps update Q incrementally
// through uv_split.
InterpolationReport interpolation_experiment(const HomSumSystem& system, std::span<const VariableSpec> y_laws,
                                             const InterpolationOptions& options);

// Runs the experiment against Gaussian Y (two moments matched) and against
// match_third_moment(E X_i^3) per coordinate (three moments matched).
struct MomentMatchingContrast {
    InterpolationReport two_moments;
    InterpolationReport three_moments;
};
MomentMatchingContrast moment_matching_contrast(const HomSumSystem& system, const InterpolationOptions& options);

}  // namespace homsum
