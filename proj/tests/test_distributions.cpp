#include <doctest.h>

#include <cmath>
#include <random>

#include "homsum/distributions.hpp"
#include "homsum/errors.hpp"
#include "oracles.hpp"

using namespace homsum;

namespace {

// E[((G - nu)/sqrt(nu))^k] from the raw moments E[G^j] = nu (nu+1) .. (nu+j-1).
double gamma_moment_binomial(double nu, int k, double sign) {
    double total = 0.0, raw = 1.0;
    for (int j = 0; j <= k; ++j) {
        if (j > 0) raw *= nu + j - 1;
        total += oracle::fact(k) / (oracle::fact(j) * oracle::fact(k - j)) * raw * std::pow(-nu, k - j);
    }
    return std::pow(sign, k) * total / std::pow(nu, 0.5 * k);
}

// Same for nu >= 1 by Simpson on the unstandardized density.
double gamma_moment_simpson(double nu, int k, double sign) {
    const auto fn = [&](double w) {
        const double y = sign * (w - nu) / std::sqrt(nu);
        return std::pow(y, k) * std::exp((nu - 1) * std::log(w) - w - std::lgamma(nu));
    };
    return oracle::simpson(fn, 1e-300, nu + 80.0 + 30.0 * std::sqrt(nu), 400000);
}

double sample_moment(const VariableSpec& s, int k, std::size_t n, std::uint64_t seed, double* se) {
    std::mt19937_64 rng(seed);
    CoordinateSampler draw(s);
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = std::pow(draw(rng), k);
        sum += v;
        sq += v * v;
    }
    const double m = sum / n;
    *se = std::sqrt((sq / n - m * m) / n);
    return m;
}

}  // namespace

TEST_SUITE("distributions") {
    TEST_CASE("moment tables start 1, 0, 1") {
        for (const char* law : {"gaussian", "gamma+:0.3", "gamma-:2", "poisson:1.5", "rademacher"}) {
            const auto s = VariableSpec::parse(law);
            CHECK(s.moment(0) == 1.0);
            CHECK(s.moment(1) == 0.0);
            CHECK(s.moment(2) == 1.0);
        }
        CHECK_THROWS_AS(VariableSpec::gaussian().moment(kMaxMomentOrder + 1), ArgumentError);
    }

    TEST_CASE("closed-form moments") {
        CHECK(VariableSpec::gamma_plus(4).moment(3) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(VariableSpec::rademacher().moment(3) == 0.0);
        CHECK(VariableSpec::rademacher().moment(4) == 1.0);
        CHECK(VariableSpec::gaussian().moment(6) == doctest::Approx(15.0));
        // (P - lambda)/sqrt(lambda): E[Y^3] = lambda^{-1/2}, E[Y^4] = 3 + 1/lambda.
        CHECK(VariableSpec::poisson(2).moment(3) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));
        CHECK(VariableSpec::poisson(2).moment(4) == doctest::Approx(3.5).epsilon(1e-13));
        const auto m = multiplier_law();
        CHECK(m.moment(1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
        CHECK(m.moment(2) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(m.moment(3) == doctest::Approx(1.0).epsilon(1e-15));
    }

    TEST_CASE("gamma moments agree with independent evaluations") {
        for (double nu : {0.3, 1.0, 4.0}) {
            for (int k = 3; k <= 8; ++k) {
                CHECK(VariableSpec::gamma_plus(nu).moment(k) ==
                      doctest::Approx(gamma_moment_binomial(nu, k, 1.0)).epsilon(1e-10));
                CHECK(VariableSpec::gamma_minus(nu).moment(k) ==
                      doctest::Approx(gamma_moment_binomial(nu, k, -1.0)).epsilon(1e-10));
                if (nu >= 1.0)
                    CHECK(VariableSpec::gamma_plus(nu).moment(k) ==
                          doctest::Approx(gamma_moment_simpson(nu, k, 1.0)).epsilon(1e-7));
            }
        }
    }

    TEST_CASE("law grammar") {
        CHECK(VariableSpec::parse("gamma+:0.5") == VariableSpec::gamma_plus(0.5));
        CHECK(VariableSpec::parse("twopoint:1,-1,0.5") == VariableSpec::two_point(1, -1, 0.5));
        CHECK(VariableSpec::parse(VariableSpec::poisson(3).to_string()) == VariableSpec::poisson(3));
        CHECK_THROWS_AS(VariableSpec::parse("gamma+:-1"), ArgumentError);
        CHECK_THROWS_AS(VariableSpec::parse("cauchy"), ArgumentError);
        CHECK_THROWS_AS(VariableSpec::parse("twopoint:1,2,0.5"), ArgumentError);  // not centered
        try {
            VariableSpec::parse("gamma");
        } catch (const ArgumentError& e) {
            CHECK(std::string(e.what()).find("gamma+:<nu>") != std::string::npos);
        }
    }

    TEST_CASE("third-moment matching") {
        CHECK(match_third_moment(0.0).law() == Law::Gaussian);
        CHECK(match_third_moment(1.0) == VariableSpec::gamma_plus(4.0));
        CHECK(match_third_moment(-2.0) == VariableSpec::gamma_minus(1.0));
        for (double s : {0.1, 0.5, 1.0, 2.0, -0.1, -0.5, -1.0, -2.0}) {
            const auto y = match_third_moment(s);
            CHECK(std::abs(y.moment(3) - s) <= 1e-10);
            const double quad = expectation(y, [](double x) { return x * x * x; });
            CHECK(std::abs(quad - s) <= 1e-10);
        }
    }

    TEST_CASE("sampling") {
        std::mt19937_64 rng(1);
        const auto g = sample(VariableSpec::gaussian(), rng, 1000000);
        double mean = 0.0;
        for (double v : g) mean += v;
        CHECK(std::abs(mean / g.size()) <= 4.0 / std::sqrt(1e6));
        for (double v : sample(VariableSpec::gamma_plus(0.7), rng, 10000)) CHECK(v >= -std::sqrt(0.7));
        for (double v : sample(VariableSpec::rademacher(), rng, 1000)) CHECK(std::abs(v) == 1.0);
    }

    TEST_CASE("sampled moments within five standard errors") {
        const VariableSpec laws[] = {VariableSpec::gaussian(), VariableSpec::gamma_plus(0.5),
                                     VariableSpec::gamma_minus(3), VariableSpec::poisson(0.8),
                                     VariableSpec::rademacher(), multiplier_law()};
        std::uint64_t seed = 100;
        for (const auto& law : laws)
            for (int k = 1; k <= 4; ++k) {
                double se = 0.0;
                const double m = sample_moment(law, k, 1000000, seed++, &se);
                CHECK(std::abs(m - law.moment(k)) <= 5.0 * se + 1e-12);
            }
    }

    TEST_CASE("psi norms") {
        CHECK(std::abs(psi_alpha_norm(VariableSpec::gaussian(), 2.0) - std::sqrt(8.0 / 3.0)) <= 1e-8);
        CHECK(psi_alpha_norm(VariableSpec::rademacher(), 1.0) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-10));
        CHECK_THROWS_AS(psi_alpha_norm(VariableSpec::gaussian(), 2.5), DomainError);
        CHECK_THROWS_AS(psi_alpha_norm(VariableSpec::gamma_plus(2), 1.5), DomainError);
    }

    TEST_CASE("psi norm of a power") {
        for (const auto& law : {VariableSpec::gaussian(), VariableSpec::gamma_plus(2.0), VariableSpec::poisson(1.0)}) {
            for (double alpha : {0.5, 1.0}) {
                const double direct = psi_alpha_norm(law, alpha);
                const double via_power = std::pow(psi_norm_of_power(law, alpha, 1.0), 1.0 / alpha);
                CHECK(direct == doctest::Approx(via_power).epsilon(1e-8));
            }
        }
    }

    TEST_CASE("psi norm monotonicity in alpha") {
        for (const auto& law : {VariableSpec::gaussian(), VariableSpec::rademacher(), VariableSpec::gamma_minus(1.0)}) {
            const double a = 0.5, b = 1.0;
            CHECK(psi_alpha_norm(law, a) <=
                  std::pow(std::log(2.0), 1.0 / b - 1.0 / a) * psi_alpha_norm(law, b) * (1 + 1e-10));
        }
        CHECK(psi_alpha_norm(VariableSpec::gaussian(), 1.0) <=
              std::pow(std::log(2.0), 0.5 - 1.0) * psi_alpha_norm(VariableSpec::gaussian(), 2.0));
    }

    TEST_CASE("Gaussian psi_2 equation by Simpson") {
        const double c = psi_alpha_norm(VariableSpec::gaussian(), 2.0);
        const double e = oracle::simpson(
            [c](double x) { return std::exp(x * x / (c * c)) * oracle::normal_pdf(x); }, -40.0, 40.0, 200000);
        CHECK(e == doctest::Approx(2.0).epsilon(1e-9));
    }

    TEST_CASE("tail bounds") {
        const auto t = tail_bound_check(VariableSpec::gaussian(), 2.0, 2.0);
        CHECK(t.tail == doctest::Approx(2.0 * (1.0 - oracle::normal_cdf(2.0))).epsilon(1e-9));
        CHECK(t.bound == doctest::Approx(2.0 * std::exp(-4.0 / (8.0 / 3.0))).epsilon(1e-8));
        CHECK(t.holds());
        CHECK(tail_bound_check(VariableSpec::gaussian(), 2.0, 0.0).bound == doctest::Approx(2.0));
        const auto r = tail_bound_check(VariableSpec::rademacher(), 1.0, 2.0);
        CHECK(r.tail == 0.0);
        CHECK(r.holds());
        for (double x : {0.5, 1.0, 3.0, 6.0}) CHECK(tail_bound_check(VariableSpec::gamma_plus(0.5), 1.0, x).holds());
    }

    TEST_CASE("moment growth") {
        for (const auto& law : {VariableSpec::gaussian(), VariableSpec::gamma_plus(1.0), VariableSpec::rademacher()})
            for (double alpha : {0.5, 1.0})
                for (double p : {2.0, 4.0, 8.0})
                    CHECK(lp_norm(law, p) <= moment_growth_constant(alpha) * psi_alpha_norm(law, alpha) *
                                                 std::pow(p, 1.0 / alpha));
        CHECK(lp_norm(VariableSpec::gaussian(), 4.0) == doctest::Approx(std::pow(3.0, 0.25)).epsilon(1e-10));
    }

    TEST_CASE("normal helpers") {
        CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
        CHECK(normal_quantile(oracle::normal_cdf(1.3)) == doctest::Approx(1.3).epsilon(1e-10));
    }
}
