#include "homsum/combinatorics.hpp"

#include <bit>
#include <cmath>

#include "homsum/errors.hpp"

namespace homsum {

double factorial(int n) {
    if (n < 0) throw ArgumentError("factorial of a negative integer");
    double out = 1.0;
    for (int k = 2; k <= n; ++k) out *= k;
    return out;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double out = 1.0;
    for (int j = 1; j <= k; ++j) out = out * (n - k + j) / j;
    return std::round(out);
}

double offdiag_constant(int q) {
    double c = 0.0;
    for (int r = 1; r <= q; ++r) {
        const double b = binomial(q, r);
        c += factorial(r) * b * b;
    }
    return c;
}

std::vector<std::uint32_t> subsets_of_size(int n, int k) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask)
        if (std::popcount(mask) == k) out.push_back(mask);
    return out;
}

}  // namespace homsum
