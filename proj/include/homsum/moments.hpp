#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "homsum/distributions.hpp"
#include "homsum/kernel.hpp"

namespace homsum {

// d kernels over one coordinate vector, plus the Gaussian target covariance.
class HomSumSystem {
public:
    // Throws ArgumentError("kernel dim mismatch") if kernels disagree on N or the
    // coordinate list has the wrong length. Without a target the exact Gram
    // matrix is used.
    HomSumSystem(std::vector<SymmetricKernel> kernels, std::vector<VariableSpec> coordinates,
                 std::optional<Eigen::MatrixXd> target = std::nullopt);

    int dim() const { return kernels_.front().dim(); }
    int size() const { return static_cast<int>(kernels_.size()); }
    int max_degree() const;
    const std::vector<SymmetricKernel>& kernels() const { return kernels_; }
    const SymmetricKernel& kernel(int j) const { return kernels_.at(j); }
    const std::vector<VariableSpec>& coordinates() const { return coordinates_; }
    bool has_explicit_target() const { return explicit_target_; }
    const Eigen::MatrixXd& target() const { return target_; }

    // E[Q_j Q_k] = q! <f_j, f_k> 1{q_j = q_k}.
    Eigen::MatrixXd gram() const;

private:
    std::vector<SymmetricKernel> kernels_;
    std::vector<VariableSpec> coordinates_;
    Eigen::MatrixXd target_;
    bool explicit_target_ = false;
};

struct MomentOptions {
    int max_order = 12;        // total tensor order of the product
    double max_loops = 1e9;    // product of entry counts over all factors
    unsigned threads = 1;
};

// E[prod_t Q(factor_t; X)] by expanding over stored tuples, tracking index
// multiplicities and multiplying per-coordinate moments. Branches that leave an
// index with multiplicity one are pruned once too few slots remain to fix it.
double product_moment(std::span<const SymmetricKernel* const> factors, std::span<const VariableSpec> coordinates,
                      const MomentOptions& options = {});

struct FactorPower {
    int kernel;
    int count;
};

double exact_product_moment(const HomSumSystem& system, std::span<const FactorPower> powers,
                            const MomentOptions& options = {});

// E[Q^4] - 3 E[Q^2]^2 through the generic product oracle.
double kappa4_oracle(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                     const MomentOptions& options = {});
// Same quantity, using the closed forms for q = 1 and q = 2 and the oracle otherwise.
double kappa4(const SymmetricKernel& f, std::span<const VariableSpec> coordinates, const MomentOptions& options = {});
double kappa4(const HomSumSystem& system, int j, const MomentOptions& options = {});

// Fourth moment of a degree-2 sum split by coincidence pattern:
// E[Q^4] = g1 + 6 g2 + 12 g3 + 24 g4 + 6 g5, where
//   g1 = 8 sum_{D2} f_ij^4 m4_i m4_j
//   g2 = 8 sum_{D3} f_ij^2 f_ik^2 m4_i
//   g3 = 8 sum_{D3} f_ij^2 f_ik f_jk m3_i m3_j
//   g4 = 2 sum_{D4} f_ij f_ik f_lj f_lk
//   g5 = 2 sum_{D4} f_ij^2 f_kl^2
// with D_n the ordered tuples of n distinct indices. Evaluated in O(N^3) via
// matrix identities.
struct DeJongTerms {
    double fourth_moment = 0.0;
    double g1 = 0.0, g2 = 0.0, g3 = 0.0, g4 = 0.0, g5 = 0.0;
    // |E[Q^4] - 6 g5| <= g1 + 18 g2 + 12 |g3| + 24 |g4|; g3 vanishes for symmetric laws.
    bool classical_bound_holds() const;
};
DeJongTerms dejong_q2_fourth_moment(const SymmetricKernel& f, std::span<const VariableSpec> coordinates);

struct ContractionBound {
    double max_contraction = 0.0;  // max_{1<=r<q} ||f *_r f||
    double abs_kappa4 = 0.0;
    double influence_term = 0.0;   // (1 + max E[X^4]) ||f||^2 M(f)
    // Smallest C with max_contraction^2 <= |kappa4| + C * influence_term.
    double fitted_constant() const;
};
ContractionBound contraction_bound_check(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                                         const MomentOptions& options = {});

enum class TransferCondition { A, B, C };

// M(f) <= max_r ||f *_r f|| <= sqrt(kappa4) / (q q!).
struct TransferChain {
    double max_influence = 0.0;
    double max_contraction = 0.0;
    double kappa_term = 0.0;
    bool holds(double rel_slack = 1e-10) const;
};
// Condition A: i.i.d. with E[X^3] = 0 and E[X^4] >= 3; B: all PoissonStd;
// C: all GammaPlus. Other coordinate lists throw ArgumentError.
TransferChain transfer_inequality_check(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                                        TransferCondition condition, const MomentOptions& options = {});

}  // namespace homsum
