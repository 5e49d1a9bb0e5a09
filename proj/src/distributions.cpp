#include "homsum/distributions.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/quadrature.hpp"

namespace homsum {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;

std::vector<double> moments_from_cumulants(const std::vector<double>& kappa) {
    const int n_max = static_cast<int>(kappa.size()) - 1;
    std::vector<double> m(n_max + 1, 0.0);
    m[0] = 1.0;
    for (int n = 1; n <= n_max; ++n) {
        double s = 0.0;
        for (int k = 1; k <= n; ++k) s += binomial(n - 1, k - 1) * kappa[k] * m[n - k];
        m[n] = s;
    }
    return m;
}

void require_positive(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x)) throw ArgumentError(std::string(what) + " must be positive and finite");
}

// Integral of density(omega) * value over omega in [lo, hi] for Gamma(nu, 1).
// fn receives (omega, log density). Small shapes use u = omega^nu, which
// removes the omega^{nu-1} singularity at the origin.
double gamma_integral(double nu, double lo, double hi, const std::function<double(double, double)>& fn) {
    lo = std::max(lo, 0.0);
    if (hi <= lo) return 0.0;
    const double sd = std::sqrt(nu);
    std::vector<double> breaks = {0.5 * nu, nu, nu + 2 * sd, nu + 5 * sd, nu + 10 * sd + 10, nu + 30 * sd + 40};
    const double lg = std::lgamma(nu);
    const double lg1 = std::lgamma(nu + 1.0);
    const bool substitute = nu < 1.0;

    const auto integrand = [&](double x) -> double {
        double omega, logd;
        if (substitute) {
            omega = std::pow(x, 1.0 / nu);
            logd = -omega - lg1;  // includes the Jacobian
        } else {
            omega = x;
            if (omega <= 0.0) return nu == 1.0 ? fn(0.0, -lg) : 0.0;
            logd = (nu - 1.0) * std::log(omega) - omega - lg;
        }
        return fn(omega, logd);
    };
    const auto map = [&](double w) { return substitute ? std::pow(w, nu) : w; };

    const double a = map(lo);
    std::vector<double> inner;
    for (double b : breaks)
        if (b > lo && b < hi) inner.push_back(map(b));
    if (std::isinf(hi)) return integrate_to_infinity(integrand, a, inner, 1e-13);
    CompensatedSum s;
    double left = a;
    inner.push_back(map(hi));
    for (double b : inner) {
        s += integrate(integrand, left, b, 1e-13);
        left = b;
    }
    return s.value();
}

double gaussian_integral(const std::function<double(double, double)>& fn) {
    // fn(x, log phi(x)) summed over both half lines.
    const auto both = [&](double x) {
        const double logd = -0.5 * x * x - kLogSqrt2Pi;
        return fn(x, logd) + fn(-x, logd);
    };
    const double breaks[] = {0.5, 1, 2, 3, 4, 6, 8, 12, 16};
    return integrate_to_infinity(both, 0.0, breaks, 1e-13);
}

double poisson_sum(double lambda, const std::function<double(double, double)>& fn) {
    const double sd = std::sqrt(lambda);
    CompensatedSum s;
    double peak = 0.0;
    const double log_lambda = std::log(lambda);
    for (long k = 0; k < 20000000; ++k) {
        const double logp = k * log_lambda - lambda - std::lgamma(k + 1.0);
        const double term = fn((k - lambda) / sd, logp);
        s += term;
        peak = std::max(peak, std::abs(term));
        if (k > lambda + 10 * sd + 20 && std::abs(term) <= 1e-18 * peak) break;
    }
    return s.value();
}

// Generic law integral of fn(x, log weight) with weights summing to one.
double law_integral(const VariableSpec& spec, const std::function<double(double, double)>& fn) {
    switch (spec.law()) {
        case Law::Gaussian:
            return gaussian_integral(fn);
        case Law::GammaPlus:
        case Law::GammaMinus: {
            const double nu = spec.shape(), sd = std::sqrt(nu);
            const double sign = spec.law() == Law::GammaPlus ? 1.0 : -1.0;
            return gamma_integral(nu, 0.0, std::numeric_limits<double>::infinity(),
                                  [&](double omega, double logd) { return fn(sign * (omega - nu) / sd, logd); });
        }
        case Law::PoissonStd:
            return poisson_sum(spec.shape(), fn);
        case Law::Rademacher:
            return fn(1.0, std::log(0.5)) + fn(-1.0, std::log(0.5));
        case Law::TwoPoint:
            return fn(spec.point_a(), std::log(spec.point_p())) + fn(spec.point_b(), std::log1p(-spec.point_p()));
        case Law::CustomMoments:
            break;
    }
    throw ArgumentError("law given only by moments is unsupported here");
}

// Expectation threshold below which E[exp(|X|^e / s)] diverges.
double critical_scale(const VariableSpec& spec, double e) {
    switch (spec.law()) {
        case Law::Gaussian:
            if (e < 2.0) return 0.0;
            if (e == 2.0) return 2.0;
            break;
        case Law::GammaPlus:
        case Law::GammaMinus:
            if (e < 1.0) return 0.0;
            if (e == 1.0) return 1.0 / std::sqrt(spec.shape());
            break;
        case Law::PoissonStd:
            if (e <= 1.0) return 0.0;
            break;
        case Law::Rademacher:
        case Law::TwoPoint:
            return 0.0;
        case Law::CustomMoments:
            throw ArgumentError("psi norm of a law given only by moments is unsupported");
    }
    throw DomainError("psi norm is infinite: tail of " + spec.to_string() + " too heavy for exponent " +
                      std::to_string(e));
}

double parse_number(std::string_view s, std::string_view text) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ArgumentError("bad law '" + std::string(text) +
                            "'; grammar: gaussian | gamma+:<nu> | gamma-:<nu> | poisson:<lambda> | rademacher | "
                            "twopoint:<a>,<b>,<p>");
    return v;
}

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

VariableSpec::VariableSpec(Law law, std::vector<double> param) : law_(law), param_(std::move(param)) {
    std::vector<double> m;
    switch (law_) {
        case Law::Gaussian: {
            std::vector<double> kappa(kMaxMomentOrder + 1, 0.0);
            kappa[2] = 1.0;
            m = moments_from_cumulants(kappa);
            break;
        }
        case Law::GammaPlus:
        case Law::GammaMinus: {
            const double nu = param_[0];
            require_positive(nu, "gamma shape");
            const double sign = law_ == Law::GammaPlus ? 1.0 : -1.0;
            std::vector<double> kappa(kMaxMomentOrder + 1, 0.0);
            for (int n = 2; n <= kMaxMomentOrder; ++n)
                kappa[n] = std::pow(sign, n) * nu * factorial(n - 1) / std::pow(nu, 0.5 * n);
            m = moments_from_cumulants(kappa);
            break;
        }
        case Law::PoissonStd: {
            const double lambda = param_[0];
            require_positive(lambda, "poisson rate");
            std::vector<double> kappa(kMaxMomentOrder + 1, 0.0);
            for (int n = 2; n <= kMaxMomentOrder; ++n) kappa[n] = std::pow(lambda, 1.0 - 0.5 * n);
            m = moments_from_cumulants(kappa);
            break;
        }
        case Law::Rademacher:
            m.assign(kMaxMomentOrder + 1, 0.0);
            for (int k = 0; k <= kMaxMomentOrder; k += 2) m[k] = 1.0;
            break;
        case Law::TwoPoint: {
            const double a = param_[0], b = param_[1], p = param_[2];
            if (!(p > 0.0 && p < 1.0)) throw ArgumentError("two-point probability must lie in (0, 1)");
            const double mean = p * a + (1 - p) * b;
            const double var = p * a * a + (1 - p) * b * b - mean * mean;
            if (std::abs(mean) > 1e-9 || std::abs(var - 1.0) > 1e-9)
                throw ArgumentError("two-point law must be centered with unit variance");
            m.assign(kMaxMomentOrder + 1, 0.0);
            for (int k = 0; k <= kMaxMomentOrder; ++k) m[k] = p * std::pow(a, k) + (1 - p) * std::pow(b, k);
            break;
        }
        case Law::CustomMoments:
            if (param_.size() < 3 || std::abs(param_[0] - 1.0) > 1e-12 || std::abs(param_[1]) > 1e-12 ||
                std::abs(param_[2] - 1.0) > 1e-12)
                throw ArgumentError("moment sequence must start 1, 0, 1");
            m = param_;
            break;
    }
    // Standardization is part of every law's definition; pin it exactly.
    m[0] = 1.0;
    m[1] = 0.0;
    m[2] = 1.0;
    table_.m = std::move(m);
}

VariableSpec VariableSpec::gaussian() { return VariableSpec(Law::Gaussian, {}); }
VariableSpec VariableSpec::gamma_plus(double nu) { return VariableSpec(Law::GammaPlus, {nu}); }
VariableSpec VariableSpec::gamma_minus(double nu) { return VariableSpec(Law::GammaMinus, {nu}); }
VariableSpec VariableSpec::poisson(double lambda) { return VariableSpec(Law::PoissonStd, {lambda}); }
VariableSpec VariableSpec::rademacher() { return VariableSpec(Law::Rademacher, {}); }
VariableSpec VariableSpec::two_point(double a, double b, double p) { return VariableSpec(Law::TwoPoint, {a, b, p}); }
VariableSpec VariableSpec::custom(std::vector<double> moments) {
    return VariableSpec(Law::CustomMoments, std::move(moments));
}

VariableSpec VariableSpec::parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view head = text.substr(0, colon);
    const std::string_view args = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
    const bool has_args = colon != std::string_view::npos;
    if (head == "gaussian" && !has_args) return gaussian();
    if (head == "rademacher" && !has_args) return rademacher();
    try {
        if (head == "gamma+" && has_args) return gamma_plus(parse_number(args, text));
        if (head == "gamma-" && has_args) return gamma_minus(parse_number(args, text));
        if (head == "poisson" && has_args) return poisson(parse_number(args, text));
        if (head == "twopoint" && has_args) {
            const auto c1 = args.find(','), c2 = args.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
            if (c1 != std::string_view::npos && c2 != std::string_view::npos)
                return two_point(parse_number(args.substr(0, c1), text),
                                 parse_number(args.substr(c1 + 1, c2 - c1 - 1), text),
                                 parse_number(args.substr(c2 + 1), text));
        }
    } catch (const ArgumentError& e) {
        throw ArgumentError("bad law '" + std::string(text) + "': " + e.what());
    }
    parse_number("", text);  // throws with the grammar
    return gaussian();
}

std::string VariableSpec::to_string() const {
    switch (law_) {
        case Law::Gaussian:
            return "gaussian";
        case Law::GammaPlus:
            return "gamma+:" + format_number(param_[0]);
        case Law::GammaMinus:
            return "gamma-:" + format_number(param_[0]);
        case Law::PoissonStd:
            return "poisson:" + format_number(param_[0]);
        case Law::Rademacher:
            return "rademacher";
        case Law::TwoPoint:
            return "twopoint:" + format_number(param_[0]) + "," + format_number(param_[1]) + "," +
                   format_number(param_[2]);
        case Law::CustomMoments:
            return "custom";
    }
    return "custom";
}

double VariableSpec::moment(int k) const {
    if (k < 0 || k > table_.max_order())
        throw ArgumentError("moment of order " + std::to_string(k) + " is not tabulated for " + to_string());
    return table_[k];
}

VariableSpec match_third_moment(double s) {
    if (s == 0.0) return VariableSpec::gaussian();
    const double nu = 4.0 / (s * s);
    return s > 0 ? VariableSpec::gamma_plus(nu) : VariableSpec::gamma_minus(nu);
}

VariableSpec multiplier_law() {
    const double r5 = std::sqrt(5.0);
    return VariableSpec::two_point(0.5 * (1 + r5), 0.5 * (1 - r5), (r5 - 1) / (2 * r5));
}

CoordinateSampler::CoordinateSampler(const VariableSpec& spec) : spec_(spec) {
    switch (spec.law()) {
        case Law::GammaPlus:
        case Law::GammaMinus:
            gamma_ = std::gamma_distribution<double>(spec.shape(), 1.0);
            break;
        case Law::PoissonStd:
            poisson_ = std::poisson_distribution<long>(spec.shape());
            break;
        case Law::TwoPoint:
            coin_ = std::bernoulli_distribution(spec.point_p());
            break;
        case Law::CustomMoments:
            throw ArgumentError("cannot sample a law given only by moments");
        default:
            break;
    }
}

double CoordinateSampler::operator()(std::mt19937_64& rng) {
    switch (spec_.law()) {
        case Law::Gaussian:
            return normal_(rng);
        case Law::GammaPlus:
            return (gamma_(rng) - spec_.shape()) / std::sqrt(spec_.shape());
        case Law::GammaMinus:
            return (spec_.shape() - gamma_(rng)) / std::sqrt(spec_.shape());
        case Law::PoissonStd:
            return (static_cast<double>(poisson_(rng)) - spec_.shape()) / std::sqrt(spec_.shape());
        case Law::Rademacher:
            return (rng() >> 63) ? 1.0 : -1.0;
        case Law::TwoPoint:
            return coin_(rng) ? spec_.point_a() : spec_.point_b();
        case Law::CustomMoments:
            break;
    }
    throw ArgumentError("cannot sample a law given only by moments");
}

double sample(const VariableSpec& spec, std::mt19937_64& rng) {
    CoordinateSampler s(spec);
    return s(rng);
}

std::vector<double> sample(const VariableSpec& spec, std::mt19937_64& rng, std::size_t n) {
    CoordinateSampler s(spec);
    std::vector<double> out(n);
    for (double& x : out) x = s(rng);
    return out;
}

double expectation(const VariableSpec& spec, const std::function<double(double)>& h) {
    return law_integral(spec, [&](double x, double logw) {
        const double w = std::exp(logw);
        return w == 0.0 ? 0.0 : w * h(x);
    });
}

double expectation_exp(const VariableSpec& spec, const std::function<double(double)>& g) {
    return law_integral(spec, [&](double x, double logw) { return std::exp(logw + g(x)); });
}

double lp_norm(const VariableSpec& spec, double p) {
    require_positive(p, "moment order");
    return std::pow(expectation(spec, [p](double x) { return std::pow(std::abs(x), p); }), 1.0 / p);
}

double psi_norm_of_power(const VariableSpec& spec, double power, double alpha) {
    require_positive(alpha, "alpha");
    require_positive(power, "power");
    const double e = power * alpha;
    const double crit = critical_scale(spec, e);
    // E[exp(|X|^e / s)] with s = C^alpha, strictly decreasing in s.
    const auto excess = [&](double s) {
        return expectation_exp(spec, [&](double x) { return std::pow(std::abs(x), e) / s; }) - 2.0;
    };
    double hi = std::max(1.0, 2.0 * crit);
    double lo;
    if (excess(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        while (excess(hi) > 0.0) {
            lo = hi;
            hi *= 2.0;
        }
    } else {
        lo = crit + 0.5 * (hi - crit);
        while (excess(lo) <= 0.0) {
            hi = lo;
            lo = crit + 0.5 * (lo - crit);
            if (lo - crit < 1e-300) throw DomainError("psi norm bracketing failed");
        }
    }
    while ((hi - lo) > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return std::pow(0.5 * (lo + hi), 1.0 / alpha);
}

double psi_alpha_norm(const VariableSpec& spec, double alpha) { return psi_norm_of_power(spec, 1.0, alpha); }

TailCheck tail_bound_check(const VariableSpec& spec, double alpha, double x) {
    TailCheck out;
    const double psi = psi_alpha_norm(spec, alpha);
    out.bound = 2.0 * std::exp(-std::pow(std::max(x, 0.0) / psi, alpha));
    if (x <= 0.0) {
        out.tail = 1.0;
        return out;
    }
    switch (spec.law()) {
        case Law::Gaussian:
            out.tail = std::erfc(x / std::sqrt(2.0));
            break;
        case Law::GammaPlus:
        case Law::GammaMinus: {
            const double nu = spec.shape(), sd = std::sqrt(nu);
            const auto density = [](double, double logd) { return std::exp(logd); };
            out.tail = gamma_integral(nu, nu + x * sd, std::numeric_limits<double>::infinity(), density) +
                       gamma_integral(nu, 0.0, nu - x * sd, density);
            break;
        }
        default:
            out.tail = law_integral(spec, [x](double y, double logw) { return std::abs(y) >= x ? std::exp(logw) : 0.0; });
            break;
    }
    return out;
}

double moment_growth_constant(double alpha) {
    require_positive(alpha, "alpha");
    const double e = std::exp(1.0);
    return std::exp(1.0 / (2.0 * e) - 1.0 / alpha) * std::pow(alpha, -1.0 / alpha) *
           std::max(1.0, 2.0 * std::sqrt(2.0 * M_PI / alpha) * std::exp(alpha / 12.0));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw ArgumentError("normal quantile needs u in (0, 1)");
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace homsum
