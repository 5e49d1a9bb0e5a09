#pragma once

#include <functional>
#include <span>

namespace homsum {

using Integrand = std::function<double(double)>;

// Adaptive Gauss-Kronrod (7/15) on [a, b], bisecting the worst panel until the
// global error estimate drops below rel_tol * |integral| (or abs_tol).
double integrate(const Integrand& fn, double a, double b, double rel_tol = 1e-13, double abs_tol = 1e-300);

// Integral over [a, inf): finite panels between the given breakpoints, then the
// tail mapped to [0, 1) by x = last + t / (1 - t).
double integrate_to_infinity(const Integrand& fn, double a, std::span<const double> breaks,
                             double rel_tol = 1e-13);

}  // namespace homsum
