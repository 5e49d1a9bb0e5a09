#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "homsum/errors.hpp"
#include "homsum/lindeberg.hpp"
#include "oracles.hpp"

using namespace homsum;

TEST_SUITE("lindeberg") {
    TEST_CASE("u/v split") {
        std::mt19937_64 rng(1);
        std::normal_distribution<double> z;
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 5;
            const auto f = oracle::random_kernel(1 + trial % 3, n, 0.7, rng);
            std::vector<double> w(n);
            for (double& v : w) v = z(rng);
            for (int i = 0; i < n; ++i) {
                const auto s = uv_split(f, w, i);
                CHECK(std::abs(s.u + w[i] * s.v - oracle::dense_evaluate(f, w)) <=
                      1e-12 * std::max(1.0, std::abs(s.u) + std::abs(w[i] * s.v)));
                auto moved = w;
                moved[i] = 7.5;
                const auto t = uv_split(f, moved, i);
                CHECK(t.u == s.u);
                CHECK(t.v == s.v);
            }
        }
        CHECK_THROWS_AS(uv_split(banded_kernel(4), std::vector<double>(3), 0), ArgumentError);
    }

    TEST_CASE("hybrids") {
        const std::vector<double> x{1, 2, 3, 4}, y{-1, -2, -3, -4};
        const std::vector<int> order{2, 0, 3, 1};
        CHECK(hybrid_vector(x, y, order, 0) == y);
        CHECK(hybrid_vector(x, y, order, 4) == x);
        CHECK(hybrid_vector(x, y, order, 2) == std::vector<double>{1, -2, 3, -4});
        const std::vector<VariableSpec> xl(4, VariableSpec::rademacher()), yl(4, VariableSpec::gaussian());
        const auto mid = hybrid_laws(xl, yl, order, 1);
        CHECK(mid[2] == VariableSpec::rademacher());
        CHECK(mid[0] == VariableSpec::gaussian());
        for (const auto& law : mid) {
            CHECK(law.moment(1) == 0.0);
            CHECK(law.moment(2) == 1.0);
        }
        CHECK_THROWS_AS(hybrid_vector(x, y, order, 5), ArgumentError);
    }

    TEST_CASE("influence rates") {
        const int n = 16;
        const HomSumSystem sys({banded_kernel(n), uniform_linear_kernel(n)},
                               std::vector<VariableSpec>(n, VariableSpec::gaussian()));
        const double m = psi_alpha_norm(VariableSpec::gaussian(), 1.0);
        const auto lam = lambda_rates(sys, 1.0);
        REQUIRE(lam.size() == n);
        const double lead = std::log(2.0);
        for (int i = 0; i < n; ++i) {
            const double band = m * std::sqrt(banded_kernel(n).influence(i));
            const double lin = std::sqrt(uniform_linear_kernel(n).influence(i));
            CHECK(lam[i] == doctest::Approx(lead * std::max(band, lin)).epsilon(1e-10));
        }
        const auto params = lindeberg_params(sys, 1.0);
        CHECK(params.tau == doctest::Approx(std::log(4.0)));
        CHECK(params.rho == doctest::Approx(std::log(4.0)));
        const double product = params.tau * params.rho * params.psi_bound * lam.maxCoeff();
        CHECK(params.constraint_holds(0.99 / product));
        CHECK_FALSE(params.constraint_holds(1.01 / product));
    }

    TEST_CASE("identical laws interpolate to zero") {
        const int n = 8;
        const std::vector<VariableSpec> laws(n, VariableSpec::rademacher());
        const HomSumSystem sys({banded_kernel(n), uniform_linear_kernel(n)}, laws);
        InterpolationOptions opts;
        opts.permutations = 8;
        opts.mc = 4000;
        opts.seed = 3;
        opts.beta = 2.0;
        opts.h = Cutoff{1.0, 0.5};
        const auto r = interpolation_experiment(sys, laws, opts);
        CHECK(r.difference <= 5.0 * r.difference_se + 1e-12);
        CHECK(r.permutation_totals.size() == 8);
        CHECK(r.step_magnitude_sums.size() == 8);
        CHECK(r.mean_step_magnitude.size() == static_cast<std::size_t>(n));
        for (std::size_t p = 0; p < r.permutation_totals.size(); ++p)
            CHECK(std::abs(r.permutation_totals[p]) <= r.step_magnitude_sums[p] + 1e-12);
        opts.threads = 3;
        const auto again = interpolation_experiment(sys, laws, opts);
        CHECK(again.difference == r.difference);
        CHECK(again.permutation_totals == r.permutation_totals);
    }

    TEST_CASE("swap orders agree on the total") {
        const int n = 10;
        const std::vector<VariableSpec> laws(n, VariableSpec::gamma_plus(1.0));
        const HomSumSystem sys({banded_kernel(n)}, laws);
        InterpolationOptions opts;
        opts.permutations = 12;
        opts.mc = 20000;
        opts.seed = 5;
        opts.beta = 1.0;
        opts.h = Cutoff{0.5, 0.5};
        const auto r = interpolation_experiment(sys, std::vector<VariableSpec>(n, VariableSpec::gaussian()), opts);
        const double mean =
            std::accumulate(r.permutation_totals.begin(), r.permutation_totals.end(), 0.0) / r.permutation_totals.size();
        double var = 0.0;
        for (double t : r.permutation_totals) var += (t - mean) * (t - mean);
        var /= r.permutation_totals.size() - 1;
        // Each total estimates the same difference from independent draws.
        for (double t : r.permutation_totals) CHECK(std::abs(t - mean) <= 5.0 * std::sqrt(var) + 1e-12);
        CHECK(r.mean_step_magnitude_sum() >= 0.0);
    }

    TEST_CASE("third-moment matching shrinks the steps") {
        const int n = 12;
        const std::vector<VariableSpec> laws(n, VariableSpec::gamma_plus(0.5));
        const HomSumSystem sys({scaled_band_kernel(n)}, laws);
        InterpolationOptions opts;
        opts.permutations = 8;
        opts.mc = 20000;
        opts.seed = 7;
        opts.beta = 1.0;
        opts.h = Cutoff{0.5, 0.5};
        const auto c = moment_matching_contrast(sys, opts);
        CHECK(c.three_moments.mean_step_magnitude_sum() < c.two_moments.mean_step_magnitude_sum());
    }
}
