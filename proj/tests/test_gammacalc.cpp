#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/gammacalc.hpp"
#include "oracles.hpp"

using namespace homsum;

namespace {

std::vector<VariableSpec> gamma_laws(int n, std::mt19937_64& rng) {
    const VariableSpec pool[] = {VariableSpec::gaussian(), VariableSpec::gamma_plus(0.3), VariableSpec::gamma_minus(0.5),
                                 VariableSpec::gamma_plus(2.0), VariableSpec::gamma_minus(5.0)};
    std::uniform_int_distribution<int> pick(0, 4);
    std::vector<VariableSpec> out;
    for (int i = 0; i < n; ++i) out.push_back(pool[pick(rng)]);
    return out;
}

struct Pair {
    SymmetricKernel f, g;
    std::vector<VariableSpec> laws;
};

Pair random_pair(std::mt19937_64& rng, int trial) {
    const int n = 4 + trial % 2;
    auto laws = gamma_laws(n, rng);
    auto f = oracle::random_kernel(1 + trial % 2, n, 0.6, rng);
    auto g = oracle::random_kernel(1 + (trial / 2) % 3, n, 0.6, rng);
    return {std::move(f), std::move(g), std::move(laws)};
}

}  // namespace

TEST_SUITE("gammacalc") {
    TEST_CASE("context constants") {
        const GammaCalcContext gauss(std::vector<VariableSpec>(3, VariableSpec::gaussian()));
        CHECK(gauss.v(0) == doctest::Approx(2.0));
        CHECK(gauss.w_star() == 0.5);
        CHECK(gauss.eta_min() == 1.0);
        const GammaCalcContext mixed({VariableSpec::gaussian(), VariableSpec::gamma_plus(0.25)});
        CHECK(mixed.v(1) == doctest::Approx(2.0 * (1.0 + 4.0)).epsilon(1e-12));
        CHECK(mixed.eta(1) == doctest::Approx(0.5));
        CHECK(mixed.w_star() == 1.0);
        CHECK_THROWS_AS(GammaCalcContext({VariableSpec::rademacher()}), ArgumentError);
    }

    TEST_CASE("chaos grading is complete") {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 20; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const auto e = var_Jk(ctx, f, g);
            REQUIRE(static_cast<int>(e.size()) == f.degree() + g.degree() + 1);
            const auto fg = oracle::multiply(oracle::poly_of(f), oracle::poly_of(g));
            const double total = std::accumulate(e.begin(), e.end(), 0.0);
            CHECK(total == doctest::Approx(oracle::expectation(oracle::multiply(fg, fg), laws)).epsilon(1e-9));
            CHECK(std::sqrt(e[0]) == doctest::Approx(std::abs(oracle::expectation(fg, laws))).epsilon(1e-9).scale(1.0));
            for (double x : e) CHECK(x >= -1e-12);
        }
    }

    TEST_CASE("top level from contractions") {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 20; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const double top = var_Jk(ctx, f, g).back();
            CHECK(top_level_energy(ctx, f, g) == doctest::Approx(top).epsilon(1e-9).scale(1.0));
        }
        // Two linear forms: J_2 = sum_{i != j} a_i b_j Y_i Y_j + sum_i a_i b_i p2(Y_i).
        const SymmetricKernel a(1, 2, {{{0}, 1.0}, {{1}, 2.0}});
        const SymmetricKernel b(1, 2, {{{0}, 3.0}, {{1}, -1.0}});
        const GammaCalcContext ctx({VariableSpec::gaussian(), VariableSpec::gamma_plus(1.0)});
        const double cross = 1.0 * -1.0 + 2.0 * 3.0;
        const double expect = cross * cross + 9.0 * 2.0 + 4.0 * 4.0;
        CHECK(top_level_energy(ctx, a, b) == doctest::Approx(expect).epsilon(1e-12));
    }

    TEST_CASE("variance of the carre du champ") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 15; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const auto gp = oracle::carre_du_champ(oracle::poly_of(f), oracle::poly_of(g), laws);
            const double mean = oracle::expectation(gp, laws);
            const double var = oracle::expectation(oracle::multiply(gp, gp), laws) - mean * mean;
            CHECK(gamma_variance(ctx, f, g) == doctest::Approx(var).epsilon(1e-9).scale(1.0));
            CHECK(gamma_mean(ctx, f, g) == doctest::Approx(mean).epsilon(1e-9).scale(1.0));
            const double efg = oracle::expectation(oracle::multiply(oracle::poly_of(f), oracle::poly_of(g)), laws);
            CHECK(mean == doctest::Approx(0.5 * (f.degree() + g.degree()) * efg).epsilon(1e-9).scale(1.0));
        }
    }

    TEST_CASE("pathwise evaluation matches the polynomial") {
        std::mt19937_64 rng(4);
        std::normal_distribution<double> z;
        for (int trial = 0; trial < 10; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const auto gp = oracle::carre_du_champ(oracle::poly_of(f), oracle::poly_of(g), laws);
            std::vector<double> y(laws.size());
            for (double& v : y) v = z(rng);
            double ref = 0.0;
            for (const auto& [e, c] : gp) {
                double t = c;
                for (std::size_t i = 0; i < e.size(); ++i) t *= std::pow(y[i], e[i]);
                ref += t;
            }
            CHECK(gamma_pathwise(ctx, f, g, y) == doctest::Approx(ref).epsilon(1e-10).scale(1.0));
        }
    }

    TEST_CASE("sampled variance agrees") {
        std::mt19937_64 rng(5);
        const auto [f, g, laws] = random_pair(rng, 3);
        const GammaCalcContext ctx(laws);
        std::mt19937_64 draw(6);
        std::vector<CoordinateSampler> samplers(laws.begin(), laws.end());
        std::vector<double> y(laws.size());
        const int n = 200000;
        double s = 0.0, s2 = 0.0;
        for (int t = 0; t < n; ++t) {
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = samplers[i](draw);
            const double v = gamma_pathwise(ctx, f, g, y);
            s += v;
            s2 += v * v;
        }
        const double mean = s / n, var = s2 / n - mean * mean;
        CHECK(std::abs(mean - gamma_mean(ctx, f, g)) <= 5.0 * std::sqrt(var / n));
        CHECK(gamma_variance(ctx, f, g) == doctest::Approx(var).epsilon(0.05));
    }

    TEST_CASE("Zheng-type inequalities") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 20; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const auto z = zheng_inequalities_check(ctx, f, g);
            CHECK(z.covariance.holds(1e-10));
            CHECK(z.variance.holds(1e-10));
        }
    }

    TEST_CASE("key inequalities") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 20; ++trial) {
            const auto [f, g, laws] = random_pair(rng, trial);
            const GammaCalcContext ctx(laws);
            const auto k = key_inequalities_check(ctx, f, g);
            CHECK(k.top_energy.holds(1e-10));
            CHECK(k.has_cross == (f.degree() == g.degree()));
            if (k.has_cross) CHECK(k.cross.holds(1e-10));
        }
        // All Gaussian: the top chaos of F G is exactly the symmetrized product.
        const std::vector<VariableSpec> gauss(5, VariableSpec::gaussian());
        const auto f = oracle::random_kernel(2, 5, 0.6, rng), g = oracle::random_kernel(1, 5, 0.6, rng);
        const auto k = key_inequalities_check(GammaCalcContext(gauss), f, g);
        CHECK(k.top_energy.lhs == doctest::Approx(k.top_energy.rhs).epsilon(1e-10));
    }

    TEST_CASE("Stein terms vanish at the exact Gram matrix") {
        std::mt19937_64 rng(9);
        const auto laws = gamma_laws(5, rng);
        const auto f = oracle::random_kernel(2, 5, 0.6, rng), g = oracle::random_kernel(2, 5, 0.6, rng);
        const HomSumSystem sys({f, g}, laws);
        const GammaCalcContext ctx(laws);
        const auto t = prop52_bound_terms(ctx, sys);
        CHECK(t.delta0 == doctest::Approx(0.0).scale(1.0));
        CHECK(t.delta2 >= 0.0);
        const auto mc = stein_discrepancy_mc(ctx, sys, 20000, 3);
        CHECK(mc.mean >= 0.0);
        CHECK(mc.se > 0.0);
        CHECK(stein_discrepancy_mc(ctx, sys, 20000, 3, 4).mean == mc.mean);
    }

    TEST_CASE("hypercontractivity constants") {
        CHECK(hypercontractivity_constants(0.5, 3).eta == doctest::Approx(1.0));
        CHECK(hypercontractivity_constants(2.0, 1).eta == 1.0);
        CHECK(hypercontractivity_constants(0.25, 1).sigma2 == doctest::Approx(0.25));
        CHECK(hypercontractivity_constants(0.25, 1).eta == doctest::Approx(std::sqrt(0.5)));
        for (int k = 1; k <= 5; ++k)
            CHECK(hypercontractivity_constants(1.0, k).sigma2 == doctest::Approx(1.0));
        CHECK(hypercontractivity_constants(3.0, 2).sigma2 == doctest::Approx(binomial(4, 2)));
    }
}
