#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace homsum {

double factorial(int n);
double binomial(int n, int k);

// sum_{r=1}^q r! C(q,r)^2, the constant bounding the off-diagonal mass of f (x) f.
double offdiag_constant(int q);

// Compensated (Neumaier) accumulator; exact sums drive the identity checks.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

// All subsets of {0..n-1} of size k, as bitmasks, in increasing order.
std::vector<std::uint32_t> subsets_of_size(int n, int k);

}  // namespace homsum
