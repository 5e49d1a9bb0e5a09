#include "homsum/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "homsum/combinatorics.hpp"

namespace homsum {

namespace {

constexpr std::array<double, 8> kNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kKronrod = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGauss = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
    double a, b, value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

Panel gauss_kronrod(const Integrand& fn, double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const double fc = fn(mid);
    double kron = fc * kKronrod[7];
    double gauss = fc * kGauss[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kNodes[j];
        const double f1 = fn(mid - dx), f2 = fn(mid + dx);
        kron += kKronrod[j] * (f1 + f2);
        if (j % 2 == 1) gauss += kGauss[j / 2] * (f1 + f2);
    }
    kron *= half;
    gauss *= half;
    return {a, b, kron, std::abs(kron - gauss)};
}

}  // namespace

double integrate(const Integrand& fn, double a, double b, double rel_tol, double abs_tol) {
    if (a == b) return 0.0;
    std::priority_queue<Panel> panels;
    Panel first = gauss_kronrod(fn, a, b);
    double total = first.value, error = first.error;
    panels.push(first);
    constexpr int kMaxPanels = 4000;
    int count = 1;
    while (error > std::max(abs_tol, rel_tol * std::abs(total)) && count < kMaxPanels) {
        Panel worst = panels.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;
        panels.pop();
        const Panel left = gauss_kronrod(fn, worst.a, mid);
        const Panel right = gauss_kronrod(fn, mid, worst.b);
        total += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        panels.push(left);
        panels.push(right);
        ++count;
    }
    // Re-add from scratch to shed the drift of the incremental updates.
    CompensatedSum s;
    while (!panels.empty()) {
        s += panels.top().value;
        panels.pop();
    }
    return s.value();
}

double integrate_to_infinity(const Integrand& fn, double a, std::span<const double> breaks, double rel_tol) {
    CompensatedSum s;
    double lo = a;
    for (double b : breaks) {
        if (b <= lo) continue;
        s += integrate(fn, lo, b, rel_tol);
        lo = b;
    }
    const double last = lo;
    auto mapped = [&](double t) {
        if (t >= 1.0) return 0.0;
        const double u = 1.0 - t;
        const double v = fn(last + t / u);
        return std::isfinite(v) ? v / (u * u) : 0.0;
    };
    s += integrate(mapped, 0.0, 1.0, rel_tol);
    return s.value();
}

}  // namespace homsum
