#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/moments.hpp"
#include "homsum/simulate.hpp"
#include "oracles.hpp"

using namespace homsum;

namespace {

std::vector<VariableSpec> mixed_laws(int n, std::mt19937_64& rng) {
    const VariableSpec pool[] = {VariableSpec::gaussian(),    VariableSpec::gamma_plus(0.4), VariableSpec::gamma_minus(2),
                                 VariableSpec::poisson(1.3),  VariableSpec::rademacher(),    multiplier_law()};
    std::uniform_int_distribution<int> pick(0, 5);
    std::vector<VariableSpec> out;
    for (int i = 0; i < n; ++i) out.push_back(pool[pick(rng)]);
    return out;
}

}  // namespace

TEST_SUITE("moments") {
    TEST_CASE("system validation and Gram target") {
        const SymmetricKernel f(2, 3, {{{0, 1}, 1.0}, {{0, 2}, 2.0}});
        const SymmetricKernel g(1, 3, {{{1}, 1.0}});
        const HomSumSystem s({f, g}, std::vector<VariableSpec>(3, VariableSpec::gaussian()));
        CHECK(s.gram()(0, 0) == doctest::Approx(20.0));
        CHECK(s.gram()(0, 1) == 0.0);
        CHECK(s.target() == s.gram());
        CHECK(s.max_degree() == 2);
        try {
            HomSumSystem({f, SymmetricKernel(2, 4)}, std::vector<VariableSpec>(3, VariableSpec::gaussian()));
            FAIL("expected dim mismatch");
        } catch (const ArgumentError& e) {
            CHECK(std::string(e.what()).find("kernel dim mismatch") != std::string::npos);
        }
        Eigen::MatrixXd bad(2, 2);
        bad << 1, 0.5, 0.1, 1;
        CHECK_THROWS_AS(HomSumSystem({f, g}, std::vector<VariableSpec>(3, VariableSpec::gaussian()), bad),
                        ArgumentError);
    }

    TEST_CASE("low-order moments") {
        std::mt19937_64 rng(1);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 5;
            const auto laws = mixed_laws(n, rng);
            const auto f = oracle::random_kernel(1 + trial % 3, n, 0.6, rng);
            const auto g = oracle::random_kernel(1 + (trial / 3) % 3, n, 0.6, rng);
            const HomSumSystem s({f, g}, laws);
            const FactorPower one[] = {{0, 1}};
            CHECK(exact_product_moment(s, one) == doctest::Approx(0.0).scale(1.0));
            const FactorPower sq[] = {{0, 2}};
            CHECK(exact_product_moment(s, sq) ==
                  doctest::Approx(factorial(f.degree()) * f.norm_squared()).epsilon(1e-12));
            const FactorPower cross[] = {{0, 1}, {1, 1}};
            CHECK(exact_product_moment(s, cross) == doctest::Approx(s.gram()(0, 1)).scale(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("product moments agree with polynomial algebra") {
        std::mt19937_64 rng(2);
        for (int trial = 0; trial < 30; ++trial) {
            const int n = 4 + trial % 3;
            const auto laws = mixed_laws(n, rng);
            const auto f = oracle::random_kernel(1 + trial % 3, n, 0.6, rng);
            const auto g = oracle::random_kernel(1 + (trial / 3) % 2, n, 0.6, rng);
            const SymmetricKernel* factors[] = {&f, &g, &f, &g};
            const auto pf = oracle::poly_of(f), pg = oracle::poly_of(g);
            const double ref = oracle::expectation(oracle::multiply(oracle::multiply(pf, pg), oracle::multiply(pf, pg)), laws);
            CHECK(product_moment(factors, laws) == doctest::Approx(ref).epsilon(1e-10));
            CHECK(kappa4_oracle(f, laws) == doctest::Approx(oracle::kappa4_poly(f, laws)).epsilon(1e-10).scale(1.0));
        }
    }

    TEST_CASE("threaded oracle is bit-identical") {
        std::mt19937_64 rng(3);
        const auto laws = mixed_laws(7, rng);
        const auto f = oracle::random_kernel(3, 7, 0.5, rng);
        MomentOptions one, four;
        four.threads = 4;
        CHECK(kappa4_oracle(f, laws, one) == kappa4_oracle(f, laws, four));
    }

    TEST_CASE("caps name themselves") {
        std::mt19937_64 rng(4);
        const auto f = oracle::random_kernel(4, 6, 1.0, rng);
        const std::vector<VariableSpec> laws(6, VariableSpec::gaussian());
        try {
            kappa4_oracle(f, laws);
            FAIL("expected order cap");
        } catch (const ResourceError& e) {
            CHECK(std::string(e.what()).find("order") != std::string::npos);
        }
        MomentOptions tight;
        tight.max_loops = 10;
        const auto g = banded_kernel(8);
        try {
            kappa4_oracle(g, std::vector<VariableSpec>(8, VariableSpec::gaussian()), tight);
            FAIL("expected loop cap");
        } catch (const ResourceError& e) {
            CHECK(std::string(e.what()).find("loop") != std::string::npos);
        }
    }

    TEST_CASE("closed forms") {
        const int n = 9;
        const auto f = uniform_linear_kernel(n);
        const std::vector<VariableSpec> rad(n, VariableSpec::rademacher());
        CHECK(kappa4(f, rad) == doctest::Approx(-2.0 / n).epsilon(1e-12));
        CHECK(kappa4_oracle(f, rad) == doctest::Approx(-2.0 / n).epsilon(1e-12));

        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            const auto g = oracle::random_kernel(2, 6, 0.6, rng);
            const std::vector<VariableSpec> gauss(6, VariableSpec::gaussian());
            CHECK(kappa4(g, gauss) == doctest::Approx(48.0 * trace_fourth_power(g)).epsilon(1e-10));
            CHECK(kappa4_oracle(g, gauss) == doctest::Approx(48.0 * trace_fourth_power(g)).epsilon(1e-10));
        }
    }

    TEST_CASE("quadratic fourth moment terms") {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 4 + trial % 4;
            const auto laws = mixed_laws(n, rng);
            const auto f = oracle::random_kernel(2, n, 0.6, rng);
            const auto dj = dejong_q2_fourth_moment(f, laws);
            const auto ref = oracle::quadratic_terms(f, laws);
            CHECK(dj.g1 == doctest::Approx(ref.g1).epsilon(1e-10).scale(1.0));
            CHECK(dj.g2 == doctest::Approx(ref.g2).epsilon(1e-10).scale(1.0));
            CHECK(dj.g3 == doctest::Approx(ref.g3).epsilon(1e-10).scale(1.0));
            CHECK(dj.g4 == doctest::Approx(ref.g4).epsilon(1e-10).scale(1.0));
            CHECK(dj.g5 == doctest::Approx(ref.g5).epsilon(1e-10).scale(1.0));
            const auto p = oracle::poly_of(f);
            const auto p2 = oracle::multiply(p, p);
            CHECK(dj.fourth_moment == doctest::Approx(oracle::expectation(oracle::multiply(p2, p2), laws)).epsilon(1e-10));
            CHECK(dj.g5 >= -1e-12 * std::max(1.0, dj.fourth_moment));
            CHECK(dj.classical_bound_holds());
        }
        const auto band = banded_kernel(6);
        const std::vector<VariableSpec> rad(6, VariableSpec::rademacher());
        const SymmetricKernel* four[] = {&band, &band, &band, &band};
        CHECK(dejong_q2_fourth_moment(band, rad).fourth_moment == doctest::Approx(product_moment(four, rad)).epsilon(1e-10));
        const auto single = dejong_q2_fourth_moment(SymmetricKernel(2, 6, {{{0, 2}, 1.5}}), rad);
        CHECK(single.g2 == 0.0);
        CHECK(single.g4 == 0.0);
    }

    TEST_CASE("kappa4 invariant under joint relabelling") {
        std::mt19937_64 rng(7);
        const int n = 6;
        auto laws = mixed_laws(n, rng);
        const auto f = oracle::random_kernel(2, n, 0.6, rng);
        std::vector<int> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<VariableSpec> moved(laws);
        for (int i = 0; i < n; ++i) moved[perm[i]] = laws[i];
        CHECK(kappa4(f.relabelled(perm), moved) == doctest::Approx(kappa4(f, laws)).epsilon(1e-12).scale(1.0));
    }

    TEST_CASE("fourth cumulant nonnegative under Gaussian and gamma laws") {
        std::mt19937_64 rng(8);
        const VariableSpec pool[] = {VariableSpec::gaussian(), VariableSpec::gamma_plus(0.2),
                                     VariableSpec::gamma_minus(0.45), VariableSpec::gamma_plus(3)};
        std::uniform_int_distribution<int> pick(0, 3);
        for (int trial = 0; trial < 40; ++trial) {
            const int n = 5 + trial % 3;
            std::vector<VariableSpec> laws;
            for (int i = 0; i < n; ++i) laws.push_back(pool[pick(rng)]);
            const auto f = oracle::random_kernel(1 + trial % 3, n, 0.5, rng);
            CHECK(kappa4(f, laws) >= -1e-12);
        }
    }

    TEST_CASE("contraction bound report") {
        const std::vector<VariableSpec> gauss(6, VariableSpec::gaussian());
        std::mt19937_64 rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const int q = 2 + trial % 2;
            const auto f = oracle::random_kernel(q, 6, 0.6, rng);
            // Gaussian laws: sum over r of q!^2 C(q,r)^2 ||f *_r f||^2 <= kappa4.
            const double k4 = kappa4(f, gauss);
            for (int r = 1; r < q; ++r) {
                const double c = factorial(q) * factorial(q) * binomial(q, r) * binomial(q, r);
                CHECK(c * contract(f, f, r).values.norm_squared() <= k4 * (1 + 1e-10));
            }
            const auto b = contraction_bound_check(f, gauss);
            CHECK(b.fitted_constant() >= 0.0);
        }
        // Scaled band: both sides decay like N^{-1/2}.
        const auto small = contraction_bound_check(scaled_band_kernel(32), std::vector<VariableSpec>(32, VariableSpec::rademacher()));
        const auto large = contraction_bound_check(scaled_band_kernel(128), std::vector<VariableSpec>(128, VariableSpec::rademacher()));
        CHECK(small.max_contraction / large.max_contraction == doctest::Approx(2.0).epsilon(0.05));
        CHECK(std::sqrt(small.influence_term / large.influence_term) == doctest::Approx(2.0).epsilon(0.05));
    }

    TEST_CASE("transfer chain") {
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 10; ++trial) {
            const auto f = oracle::random_kernel(2, 6, 0.6, rng);
            CHECK(transfer_inequality_check(f, std::vector<VariableSpec>(6, VariableSpec::gamma_plus(1.0)),
                                            TransferCondition::C)
                      .holds());
            CHECK(transfer_inequality_check(f, std::vector<VariableSpec>(6, VariableSpec::gaussian()),
                                            TransferCondition::A)
                      .holds());
            CHECK(transfer_inequality_check(f, std::vector<VariableSpec>(6, VariableSpec::poisson(0.7)),
                                            TransferCondition::B)
                      .holds());
        }
        const auto zero = transfer_inequality_check(SymmetricKernel(2, 4), std::vector<VariableSpec>(4, VariableSpec::gaussian()),
                                                    TransferCondition::A);
        CHECK(zero.max_influence == 0.0);
        CHECK(zero.kappa_term == 0.0);
        CHECK(zero.holds());
        CHECK_THROWS_AS(transfer_inequality_check(banded_kernel(4), std::vector<VariableSpec>(4, VariableSpec::rademacher()),
                                                  TransferCondition::A),
                        ArgumentError);
    }

    TEST_CASE("oracle agrees with sampling") {
        std::mt19937_64 rng(11);
        const auto laws = mixed_laws(6, rng);
        const auto f = oracle::random_kernel(2, 6, 0.6, rng);
        const auto est = kappa4_mc(f, laws, 400000, 12);
        CHECK(std::abs(est.value - kappa4(f, laws)) <= 5.0 * est.se);
    }
}
