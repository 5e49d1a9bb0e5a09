#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "homsum/distributions.hpp"
#include "homsum/kernel.hpp"
#include "homsum/moments.hpp"

namespace homsum {

// Coordinates restricted to Gaussian and standardized gamma laws, the setting in
// which every homogeneous sum is an eigenfunction of a diffusion generator.
class GammaCalcContext {
public:
    explicit GammaCalcContext(std::vector<VariableSpec> coordinates);

    int dim() const { return static_cast<int>(coordinates_.size()); }
    const std::vector<VariableSpec>& coordinates() const { return coordinates_; }
    // E[p2(Y_i)^2] for the degree-2 orthogonal polynomial p2(y) = y^2 - s_i y - 1.
    double v(int i) const { return v_[i]; }
    double eta(int i) const { return eta_[i]; }
    double skew(int i) const { return skew_[i]; }
    double v_max() const;
    double eta_min() const;
    // 1/2 when every coordinate is Gaussian, 1 otherwise.
    double w_star() const;

private:
    std::vector<VariableSpec> coordinates_;
    std::vector<double> v_, eta_, skew_;
};

// Expansion of F G, F = Q(f; Y), G = Q(g; Y), in the orthogonal product basis
// built from {1, Y_i, p2(Y_i)} per coordinate. The basis element with Y on the
// set A and p2 on the set B sits in chaos A + 2B; its squared norm is prod_B v_i.
class ChaosDecomposition {
public:
    ChaosDecomposition(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g);

    int top_degree() const { return top_; }
    // J_0 = E[F G].
    double mean() const;
    // E[J_k^2] for k = 0..top_degree().
    std::vector<double> level_energies() const;
    // E[J_k(this) J_k(other)] for k = 0..max top degree.
    std::vector<double> cross_energies(const ChaosDecomposition& other) const;

private:
    // Each code is 2 i + (1 if p2, 0 if Y), sorted by i.
    using Key = std::vector<std::uint32_t>;
    double norm_weight(const Key& key) const;
    static int degree_of(const Key& key);

    std::vector<double> v_;
    int top_;
    std::map<Key, double> coef_;
};

// E[J_k(FG)^2], k = 0..p+q (index 0 holds E[FG]^2).
std::vector<double> var_Jk(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g);

// E[J_{p+q}(FG)^2] from the r-indexed sums over distinct index tuples of the
// contraction symmetrized in its free slots, weighted by the v's of the
// contracted slots. Dense evaluation, independent of ChaosDecomposition.
double top_level_energy(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g);

// Var[Gamma(F, G)] = sum_{k=1}^{p+q-1} ((p+q-k)^2 / 4) E[J_k(FG)^2].
double gamma_variance(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g);

// Gamma(F, G) at a coordinate sample y: sum_i c_i dF/dy_i dG/dy_i with c_i = 1
// for Gaussian coordinates and c_i = omega_i / nu for gamma ones, where
// omega_i = nu +- sqrt(nu) y_i is the unstandardized gamma value.
double gamma_pathwise(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g,
                      std::span<const double> y);

// E[Gamma(F, G)] from sum_i E[dF/dy_i dG/dy_i] via the product-moment oracle.
double gamma_mean(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g);

struct SteinTerms {
    double delta0 = 0.0;
    double delta2 = 0.0;
};
SteinTerms prop52_bound_terms(const GammaCalcContext& ctx, const HomSumSystem& system);

struct MonteCarloEstimate {
    double mean = 0.0;
    double se = 0.0;
};
// E max_{j,k} |Gamma(Q_j, Q_k)/q_k - C_jk| by pathwise sampling.
MonteCarloEstimate stein_discrepancy_mc(const GammaCalcContext& ctx, const HomSumSystem& system, std::size_t mc,
                                        std::uint64_t seed, unsigned threads = 1);

struct ZhengReport {
    // sum_{k<p+q} E[J_k(FG)^2] <= Cov[F^2, G^2] - 2 E[FG]^2
    BoundCheck covariance;
    // sum_{k<2p} E[J_k(F^2)^2] + p!^2 sum_{r=1}^{p-1} C(p,r)^2 ||f *_r f||^2 <= kappa4(F)
    BoundCheck variance;
};
ZhengReport zheng_inequalities_check(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g,
                                     const MomentOptions& options = {});

struct KeyInequalities {
    // E[J_{p+q}(FG)^2] >= (p+q)! ||f (x)~ g||^2, stored as lhs = rhs side, rhs = energy.
    BoundCheck top_energy;
    // Only for p = q: |E[J_2p(F^2) J_2p(G^2)] - (2p)! <f(x)~f, g(x)~g>| against
    // (2^{-p} v_max^p - 1) (2p)! c_p sqrt(sum Inf(f)^2) sqrt(sum Inf(g)^2).
    bool has_cross = false;
    BoundCheck cross;
};
KeyInequalities key_inequalities_check(const GammaCalcContext& ctx, const SymmetricKernel& f,
                                       const SymmetricKernel& g);

struct Hypercontractivity {
    double sigma2 = 0.0;  // C(nu + k - 1, k)
    double eta = 0.0;     // min{1, sigma_{nu,k} / sigma_{1/2,k}}
};
Hypercontractivity hypercontractivity_constants(double nu, int k);

}  // namespace homsum
