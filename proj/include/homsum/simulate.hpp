#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "homsum/moments.hpp"

namespace homsum {

// Draws are produced in blocks of this many columns; block b always uses
// block_stream(seed, b), so samples do not depend on the thread count.
inline constexpr std::size_t kSampleBlock = 1024;

// d x mc matrix whose columns are independent draws of (Q(f_1; X), .., Q(f_d; X)).
Eigen::MatrixXd sample_Q(const HomSumSystem& system, std::size_t mc, std::uint64_t seed, unsigned threads = 1);

// Symmetric square root of a covariance, negative eigenvalues clipped at zero.
struct GaussianFactor {
    Eigen::MatrixXd root;
    double min_eigenvalue = 0.0;
    // Set when an eigenvalue below -tolerance had to be clipped.
    bool flagged = false;
};
GaussianFactor gaussian_factor(const Eigen::MatrixXd& covariance, double clip_tolerance = 1e-10);

Eigen::MatrixXd sample_gaussian(const GaussianFactor& factor, std::size_t mc, std::uint64_t seed,
                                unsigned threads = 1);
Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& covariance, std::size_t mc, std::uint64_t seed,
                                unsigned threads = 1);

struct DistanceEstimate {
    double estimate = 0.0;
    // Binomial standard error of the two empirical probabilities at the maximizer.
    double se = 0.0;
};

// sup_t |F_a(t) - F_b(t)| for two samples, exact via merged sorting.
DistanceEstimate ks_two_sample(std::span<const double> a, std::span<const double> b);

struct OrthantOptions {
    std::size_t anchor_cap = 2000;  // pooled sample points used as anchors
    bool diagonal_anchors = true;   // anchors t * s_j with s_j the pooled sd
    std::uint64_t seed = 0;         // anchor subsampling
};
// sup over anchors x of |P_a(A <= x) - P_b(B <= x)|, componentwise <=. For d = 1
// this is the two-sample Kolmogorov statistic.
DistanceEstimate kolmogorov_orthant(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const OrthantOptions& options = {});

// Same on the scalar statistic max_k |column_k|.
DistanceEstimate kolmogorov_max_stat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct BoundOptions {
    MomentOptions moments;
    // Estimate kappa4 by sampling when the exact oracle hits a cap.
    bool allow_mc = true;
    std::size_t mc = 100000;
    std::uint64_t seed = 0;
    // Overrides the third-moment switch; 1/2 when every E[X_i^3] = 0, else 1.
    std::optional<double> w;
};

struct BoundRates {
    double w = 1.0;
    double alpha = 1.0;
    double a_bar = 1.0;  // 1 v max |E X_i^3|
    double b_bar = 0.0;  // max ||X_i||_psi_alpha
    double mu = 0.0;
    double delta0 = 0.0;
    double delta1 = 0.0;
    // max sqrt(tr [f]^4) + max sqrt(M(f)) ||f||; NaN unless every kernel is quadratic.
    double delta_n = 0.0;
    double kappa4_max = 0.0;  // max |kappa4|
    double minf_max = 0.0;
    double influence_term = 0.0;  // (log d)^{(2q-1)/alpha + 3/2} max B^{q_k} sqrt(M(f_k))
    double composite = 0.0;
    bool kappa4_estimated = false;
    double kappa4_se = 0.0;
};
BoundRates bound_rates(const HomSumSystem& system, double alpha, const BoundOptions& options = {});

// E[Q^4] - 3 E[Q^2]^2 from samples with a delete-one-block jackknife SE.
struct Kappa4Estimate {
    double value = 0.0;
    double se = 0.0;
};
Kappa4Estimate kappa4_mc(const SymmetricKernel& f, std::span<const VariableSpec> coordinates, std::size_t mc,
                         std::uint64_t seed, unsigned threads = 1);

struct StudyOptions {
    std::size_t mc = 100000;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    unsigned threads = 1;
    OrthantOptions orthant;
    BoundOptions bounds;
    bool max_statistic = false;  // use kolmogorov_max_stat instead of the orthant sup
};

struct StudyPoint {
    int n = 0;
    int d = 0;
    DistanceEstimate distance;
    BoundRates rates;
    double wall_ms = 0.0;
};

struct RateStudy {
    std::vector<StudyPoint> points;
    double slope = 0.0;  // OLS of log distance on log composite
    double intercept = 0.0;
    // Smallest C with distance <= C * composite at every point.
    double fitted_constant = 0.0;
    // Each distance exceeds the next by no less than -2 combined SE.
    bool monotone = false;
    bool within_fitted = false;
};
// The ladder must hold at least four systems of strictly increasing N.
RateStudy rate_conformance_study(std::span<const HomSumSystem> ladder, const StudyOptions& options);

struct WassersteinCheck {
    double w1 = 0.0;
    double kolmogorov = 0.0;
    double rhs = 0.0;  // sqrt(4 W1 / sigma)
    bool holds(double slack = 0.0) const { return kolmogorov <= rhs + slack; }
};
WassersteinCheck wasserstein_kolmogorov_check_1d(std::span<const double> a, std::span<const double> b,
                                                 double sigma_min);

struct MomentGrowth {
    std::vector<double> p;
    std::vector<double> norms;  // estimated ||Q||_p
    double slope = 0.0;         // d log ||Q||_p / d log p
    double limit = 0.0;         // q / alpha + 0.5
    bool holds() const { return slope <= limit; }
};
MomentGrowth moment_growth_diagnostic(const HomSumSystem& system, int kernel, double alpha, std::span<const double> p,
                                      std::size_t mc, std::uint64_t seed, unsigned threads = 1);

struct ResultRecord {
    std::string exp_id;
    int n = 0;
    int d = 0;
    std::vector<int> qlist;
    std::size_t mc = 0;
    std::uint64_t seed = 0;
    double dist = 0.0;
    double dist_se = 0.0;
    double delta0 = 0.0;
    double delta1 = 0.0;
    double delta_n = 0.0;
    double kappa4_max = 0.0;
    double minf_max = 0.0;
    double composite = 0.0;
    double wall_ms = 0.0;
};
inline constexpr const char* kResultHeader =
    "exp_id,N,d,qlist,mc,seed,dist,dist_se,delta0,delta1,delta_n,kappa4_max,minf_max,composite,wall_ms";
ResultRecord make_record(const std::string& id, const HomSumSystem& system, std::size_t mc, std::uint64_t seed,
                         const DistanceEstimate& distance, const BoundRates& rates, double wall_ms);
void write_records(std::ostream& out, std::span<const ResultRecord> records);

// Least-squares slope and intercept of y on x.
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace homsum
