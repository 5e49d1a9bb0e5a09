#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace homsum {

enum class Law { Gaussian, GammaPlus, GammaMinus, PoissonStd, Rademacher, TwoPoint, CustomMoments };

// Moments are tabulated up to this order; enough for fourth powers of degree-6 sums.
inline constexpr int kMaxMomentOrder = 24;

struct MomentTable {
    std::vector<double> m;  // m[k] = E[X^k], k = 0..K
    int max_order() const { return static_cast<int>(m.size()) - 1; }
    double operator[](int k) const { return m[k]; }
};

// A centered, unit-variance coordinate law. GammaPlus(nu) is (G - nu)/sqrt(nu)
// with G ~ Gamma(nu, 1); GammaMinus is its negative; PoissonStd(lambda) is
// (P - lambda)/sqrt(lambda); TwoPoint(a, b, p) puts mass p on a.
class VariableSpec {
public:
    static VariableSpec gaussian();
    static VariableSpec gamma_plus(double nu);
    static VariableSpec gamma_minus(double nu);
    static VariableSpec poisson(double lambda);
    static VariableSpec rademacher();
    static VariableSpec two_point(double a, double b, double p);
    // Moment sequence starting at m0; must begin 1, 0, 1.
    static VariableSpec custom(std::vector<double> moments);

    // Config syntax: gaussian | gamma+:<nu> | gamma-:<nu> | poisson:<lambda> |
    // rademacher | twopoint:<a>,<b>,<p>
    static VariableSpec parse(std::string_view text);
    std::string to_string() const;

    Law law() const { return law_; }
    bool is_gamma() const { return law_ == Law::GammaPlus || law_ == Law::GammaMinus; }
    double shape() const { return param_[0]; }  // nu or lambda
    double point_a() const { return param_[0]; }
    double point_b() const { return param_[1]; }
    double point_p() const { return param_[2]; }

    const MomentTable& moments() const { return table_; }
    double moment(int k) const;
    double skewness() const { return table_[3]; }
    double excess_kurtosis() const { return table_[4] - 3.0; }

    friend bool operator==(const VariableSpec& a, const VariableSpec& b) {
        return a.law_ == b.law_ && a.param_ == b.param_ && a.table_.m == b.table_.m;
    }

private:
    VariableSpec(Law law, std::vector<double> param);

    Law law_;
    std::vector<double> param_;
    MomentTable table_;
};

// Gaussian for s = 0, GammaPlus(4/s^2) for s > 0, GammaMinus(4/s^2) for s < 0.
VariableSpec match_third_moment(double s);

// Values (1 +- sqrt 5)/2 with probabilities (sqrt 5 -+ 1)/(2 sqrt 5): m2 = m3 = 1.
VariableSpec multiplier_law();

double sample(const VariableSpec& spec, std::mt19937_64& rng);
std::vector<double> sample(const VariableSpec& spec, std::mt19937_64& rng, std::size_t n);

// Stateful sampler reusing distribution objects across draws.
class CoordinateSampler {
public:
    explicit CoordinateSampler(const VariableSpec& spec);
    double operator()(std::mt19937_64& rng);

private:
    VariableSpec spec_;
    std::normal_distribution<double> normal_;
    std::gamma_distribution<double> gamma_;
    std::poisson_distribution<long> poisson_;
    std::bernoulli_distribution coin_;
};

// E[h(X)] by quadrature (continuous laws) or summation (discrete laws).
double expectation(const VariableSpec& spec, const std::function<double(double)>& h);
// E[exp(g(X))], integrating exp(log density + g) so large exponents stay finite.
double expectation_exp(const VariableSpec& spec, const std::function<double(double)>& g);

// (E|X|^p)^{1/p}
double lp_norm(const VariableSpec& spec, double p);

// ||X||_{psi_alpha}: the C solving E[exp((|X|/C)^alpha)] = 2.
double psi_alpha_norm(const VariableSpec& spec, double alpha);
// || |X|^power ||_{psi_alpha}.
double psi_norm_of_power(const VariableSpec& spec, double power, double alpha);

struct TailCheck {
    double tail = 0.0;   // P(|X| >= x)
    double bound = 0.0;  // 2 exp(-(x / ||X||_psi)^alpha)
    bool holds() const { return tail <= bound; }
};
TailCheck tail_bound_check(const VariableSpec& spec, double alpha, double x);

// c_alpha with ||X||_p <= c_alpha ||X||_{psi_alpha} p^{1/alpha}.
double moment_growth_constant(double alpha);

// Standard normal CDF and quantile.
double normal_cdf(double x);
double normal_quantile(double u);

}  // namespace homsum
