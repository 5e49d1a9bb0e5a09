#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/kernel.hpp"
#include "oracles.hpp"

using namespace homsum;

namespace {

SymmetricKernel star_kernel() { return SymmetricKernel(2, 3, {{{0, 1}, 1.0}, {{0, 2}, 2.0}}); }

// Dense brute-force f *_r g.
std::vector<double> dense_contraction(const SymmetricKernel& f, const SymmetricKernel& g, int r) {
    const int n = f.dim(), p = f.degree(), q = g.degree(), free = p + q - 2 * r;
    const auto fd = f.dense(), gd = g.dense();
    std::size_t out_size = 1, k_size = 1;
    for (int s = 0; s < free; ++s) out_size *= n;
    for (int s = 0; s < r; ++s) k_size *= n;
    std::size_t left_size = 1;
    for (int s = 0; s < p - r; ++s) left_size *= n;
    std::size_t right_size = 1;
    for (int s = 0; s < q - r; ++s) right_size *= n;
    std::vector<double> out(out_size, 0.0);
    for (std::size_t a = 0; a < left_size; ++a)
        for (std::size_t b = 0; b < right_size; ++b)
            for (std::size_t k = 0; k < k_size; ++k) out[a * right_size + b] += fd[a * k_size + k] * gd[b * k_size + k];
    return out;
}

}  // namespace

TEST_SUITE("kernels") {
    TEST_CASE("worked example: influences and norm") {
        const auto f = star_kernel();
        CHECK(f.influence(0) == doctest::Approx(5.0));
        CHECK(f.influence(1) == doctest::Approx(1.0));
        CHECK(f.influence(2) == doctest::Approx(4.0));
        CHECK(f.max_influence() == doctest::Approx(5.0));
        CHECK(f.norm_squared() == doctest::Approx(10.0));
        CHECK_THROWS_AS(f.influence(3), ArgumentError);
    }

    TEST_CASE("empty row has zero influence") {
        const SymmetricKernel f(2, 4, {{{0, 1}, 1.0}});
        CHECK(f.influence(3) == 0.0);
    }

    TEST_CASE("construction rejects diagonals, duplicates and bad indices") {
        CHECK_THROWS_AS(SymmetricKernel(2, 3, {{{1, 1}, 1.0}}), ArgumentError);
        CHECK_THROWS_AS(SymmetricKernel(2, 3, {{{0, 3}, 1.0}}), ArgumentError);
        CHECK_THROWS_AS(SymmetricKernel(2, 3, {{{0, 1}, 1.0}, {{1, 0}, 2.0}}), ArgumentError);
        CHECK_NOTHROW(SymmetricKernel(3, 2));  // N < q: identically zero
        CHECK(SymmetricKernel(3, 2).norm_squared() == 0.0);
    }

    TEST_CASE("lookup is symmetric and vanishes on diagonals") {
        std::mt19937_64 rng(11);
        const auto f = oracle::random_kernel(3, 6, 0.5, rng);
        for (std::size_t e = 0; e < f.nnz(); ++e) {
            std::vector<int> t(f.tuple(e).begin(), f.tuple(e).end());
            do {
                CHECK(f(t) == f.value(e));
            } while (std::next_permutation(t.begin(), t.end()));
        }
        CHECK(f({1, 1, 2}) == 0.0);
        CHECK(f({4, 2, 4}) == 0.0);
    }

    TEST_CASE("influences sum to the squared norm") {
        // Each squared grid entry f(i_1..i_q)^2 is counted once, through its first
        // argument; the worked example has sum 10 = ||f||^2.
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            const auto f = oracle::random_kernel(3, 8, 0.3, rng);
            const auto d = f.dense();
            double dense_sq = 0.0;
            for (double v : d) dense_sq += v * v;
            CHECK(f.norm_squared() == doctest::Approx(dense_sq).epsilon(1e-12));
            CHECK(f.influences().sum() == doctest::Approx(dense_sq).epsilon(1e-12));
        }
    }

    TEST_CASE("evaluate matches dense enumeration") {
        std::mt19937_64 rng(7);
        std::normal_distribution<double> normal;
        for (int q = 1; q <= 3; ++q) {
            const auto f = oracle::random_kernel(q, 6, 0.5, rng);
            std::vector<double> x(6);
            for (auto& v : x) v = normal(rng);
            CHECK(f.evaluate(x) == doctest::Approx(oracle::dense_evaluate(f, x)).epsilon(1e-12));
        }
        CHECK_THROWS_AS(star_kernel().evaluate(std::vector<double>(4, 1.0)), ArgumentError);
    }

    TEST_CASE("contraction matches a dense triple loop") {
        std::mt19937_64 rng(3);
        for (int trial = 0; trial < 30; ++trial) {
            const int p = 1 + trial % 3, q = 1 + (trial / 3) % 3, n = 5 + trial % 3;
            const auto f = oracle::random_kernel(p, n, 0.5, rng), g = oracle::random_kernel(q, n, 0.5, rng);
            for (int r = 0; r <= std::min(p, q); ++r) {
                const auto c = contract(f, g, r);
                const auto ref = dense_contraction(f, g, r);
                REQUIRE(c.values.size() == ref.size());
                for (std::size_t i = 0; i < ref.size(); ++i) CHECK(c.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
            }
        }
        CHECK_THROWS_AS(contract(SymmetricKernel(2, 3), SymmetricKernel(2, 4), 1), ArgumentError);
    }

    TEST_CASE("contraction special cases of the worked example") {
        const auto f = star_kernel();
        const auto c = contract(f, f, 1);
        const Eigen::MatrixXd m = f.matrix();
        const Eigen::MatrixXd sq = m * m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(c.values[i * 3 + j] == doctest::Approx(sq(i, j)));
        CHECK(c.values.norm_squared() == doctest::Approx(50.0));
        CHECK(trace_fourth_power(f) == doctest::Approx(50.0));
        std::mt19937_64 rng(9);
        const auto g = oracle::random_kernel(2, 3, 1.0, rng);
        CHECK(contract(f, g, 0).values.norm_squared() ==
              doctest::Approx(f.norm_squared() * g.norm_squared()).epsilon(1e-12));
        CHECK(contract(f, g, 2).values[0] == doctest::Approx(inner(f, g)).epsilon(1e-12));
    }

    TEST_CASE("quadratic contraction norm equals trace of the fourth power") {
        std::mt19937_64 rng(21);
        for (int trial = 0; trial < 10; ++trial) {
            const auto f = oracle::random_kernel(2, 12, 0.4, rng);
            const Eigen::MatrixXd m = f.matrix();
            const double tr4 = (m * m * m * m).trace();
            CHECK(contract(f, f, 1).values.norm_squared() == doctest::Approx(tr4).epsilon(1e-12));
            CHECK(trace_fourth_power(f) == doctest::Approx(tr4).epsilon(1e-12));
        }
    }

    TEST_CASE("symmetrize averages permutations and is idempotent") {
        Tensor h(2, 3);
        const int at[] = {0, 1};
        h[h.flat_index(at)] = 1.0;
        const auto s = symmetrize(h);
        CHECK(s.at(std::vector<int>{0, 1}) == doctest::Approx(0.5));
        CHECK(s.at(std::vector<int>{1, 0}) == doctest::Approx(0.5));
        CHECK(s.at(std::vector<int>{0, 0}) == 0.0);

        std::mt19937_64 rng(4);
        std::normal_distribution<double> normal;
        Tensor r(3, 4);
        for (auto& v : r.data()) v = normal(rng);
        const auto once = symmetrize(r), twice = symmetrize(once);
        for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-14));
    }

    TEST_CASE("shuffle product equals symmetrized outer product") {
        std::mt19937_64 rng(6);
        for (int trial = 0; trial < 10; ++trial) {
            const int p = 1 + trial % 3, q = 1 + (trial / 3) % 2;
            const auto f = oracle::random_kernel(p, 5, 0.6, rng), g = oracle::random_kernel(q, 5, 0.6, rng);
            const auto fast = symmetric_product(f, g);
            const auto slow = symmetrize(contract(f, g, 0).values);
            for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("product formula identity on random pairs") {
        std::mt19937_64 rng(8);
        for (int trial = 0; trial < 60; ++trial) {
            const int p = 1 + trial % 3, q = 1 + (trial / 3) % 3, n = 3 + trial % 6;
            const auto f = oracle::random_kernel(p, n, 0.5, rng), g = oracle::random_kernel(q, n, 0.5, rng);
            CHECK(nr_identity_check(f, g).relative <= 1e-9);
        }
        // q = 1, f = g: both sides 2 ||f||^4.
        const SymmetricKernel f(1, 3, {{{0}, 1.0}, {{1}, -2.0}, {{2}, 0.5}});
        const auto r = nr_identity_check(f, f);
        CHECK(r.lhs == doctest::Approx(2.0 * std::pow(f.norm_squared(), 2)));
        CHECK(r.relative <= 1e-12);
    }

    TEST_CASE("off-diagonal mass bound") {
        CHECK(offdiag_constant(1) == 1.0);
        CHECK(offdiag_constant(2) == 6.0);
        CHECK(offdiag_constant(3) == doctest::Approx(9.0 + 18.0 + 6.0));
        const SymmetricKernel ones(1, 2, {{{0}, 1.0}, {{1}, 1.0}});
        const auto b = offdiag_tensor_bound_check(ones);
        // f (x) f on [2]^2 off-diagonal part: entries (0,0) and (1,1), value 1 each.
        CHECK(b.lhs == doctest::Approx(2.0));
        CHECK(b.rhs == doctest::Approx(2.0));
        CHECK(b.holds());
        CHECK(offdiag_tensor_bound_check(SymmetricKernel(2, 4, {{{1, 3}, 0.7}})).holds());
        std::mt19937_64 rng(10);
        for (int trial = 0; trial < 20; ++trial)
            CHECK(offdiag_tensor_bound_check(oracle::random_kernel(1 + trial % 3, 5, 0.5, rng)).holds());
    }

    TEST_CASE("text format round trip") {
        std::mt19937_64 rng(12);
        const auto f = oracle::random_kernel(3, 7, 0.4, rng);
        std::stringstream io;
        write_kernel(io, f);
        CHECK(io.str().rfind("homsum-kernel v1 q=3 N=7", 0) == 0);
        const auto g = read_kernel(io);
        CHECK(g == f);
        CHECK(g.content_hash() == f.content_hash());
        std::istringstream bad("homsum-kernel v1 q=2 N=3\n2 1 0.5\n");
        CHECK_THROWS_AS(read_kernel(bad), ArgumentError);
    }

    TEST_CASE("families") {
        CHECK(banded_kernel(10).norm_squared() == doctest::Approx(1.0));
        const auto s = scaled_band_kernel(16);
        CHECK(s({3, 4}) == doctest::Approx(0.25));
        const auto b = bump_band_kernel(16, 5);
        CHECK(b({4, 5}) == doctest::Approx(0.5));
        CHECK(b({5, 6}) == doctest::Approx(0.5));
        CHECK(b({6, 7}) == doctest::Approx(0.25));
        CHECK(uniform_linear_kernel(4).norm_squared() == doctest::Approx(1.0));
    }

    TEST_CASE("relabelling permutes influences") {
        std::mt19937_64 rng(13);
        const auto f = oracle::random_kernel(2, 6, 0.6, rng);
        std::vector<int> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto g = f.relabelled(perm);
        for (int i = 0; i < 6; ++i) CHECK(g.influence(perm[i]) == doctest::Approx(f.influence(i)));
    }
}
