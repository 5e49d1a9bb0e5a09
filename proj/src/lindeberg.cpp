#include "homsum/lindeberg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/rng.hpp"

namespace homsum {

namespace {

// q! sum over stored tuples through i of f times the product over the others.
double partial_at(const SymmetricKernel& f, std::span<const double> w, int i) {
    double s = 0.0;
    for (std::size_t e : f.entries_touching(i)) {
        double prod = f.value(e);
        for (int j : f.tuple(e))
            if (j != i) prod *= w[j];
        s += prod;
    }
    return factorial(f.degree()) * s;
}

}  // namespace

UVSplit uv_split(const SymmetricKernel& f, std::span<const double> w, int i) {
    if (static_cast<int>(w.size()) != f.dim()) throw ArgumentError("kernel dim mismatch");
    if (i < 0 || i >= f.dim()) throw ArgumentError("coordinate index out of range");
    UVSplit out;
    out.v = partial_at(f, w, i);
    double u = 0.0;
    for (std::size_t e = 0; e < f.nnz(); ++e) {
        const auto t = f.tuple(e);
        if (std::find(t.begin(), t.end(), i) != t.end()) continue;
        double prod = f.value(e);
        for (int j : t) prod *= w[j];
        u += prod;
    }
    out.u = factorial(f.degree()) * u;
    return out;
}

std::vector<double> hybrid_vector(std::span<const double> x, std::span<const double> y, std::span<const int> order,
                                  int step) {
    if (x.size() != y.size() || order.size() != x.size()) throw ArgumentError("hybrid inputs differ in length");
    if (step < 0 || step > static_cast<int>(order.size())) throw ArgumentError("hybrid step out of range");
    std::vector<double> w(y.begin(), y.end());
    for (int t = 0; t < step; ++t) w[order[t]] = x[order[t]];
    return w;
}

std::vector<VariableSpec> hybrid_laws(std::span<const VariableSpec> x, std::span<const VariableSpec> y,
                                      std::span<const int> order, int step) {
    if (x.size() != y.size() || order.size() != x.size()) throw ArgumentError("hybrid inputs differ in length");
    if (step < 0 || step > static_cast<int>(order.size())) throw ArgumentError("hybrid step out of range");
    std::vector<VariableSpec> w(y.begin(), y.end());
    for (int t = 0; t < step; ++t) w[order[t]] = x[order[t]];
    return w;
}

namespace {

double max_psi_norm(const HomSumSystem& system, double alpha) {
    double m = 0.0;
    std::vector<const VariableSpec*> seen;
    for (const auto& c : system.coordinates()) {
        if (std::any_of(seen.begin(), seen.end(), [&](const VariableSpec* s) { return *s == c; })) continue;
        seen.push_back(&c);
        m = std::max(m, psi_alpha_norm(c, alpha));
    }
    return m;
}

}  // namespace

Eigen::VectorXd lambda_rates(const HomSumSystem& system, double alpha) {
    if (!(alpha > 0.0)) throw ArgumentError("alpha must be positive");
    const double bound = max_psi_norm(system, alpha);
    const int qbar = system.max_degree();
    const double lead = std::pow(std::log(static_cast<double>(system.size())), (qbar - 1) / alpha);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(system.dim());
    for (const auto& f : system.kernels()) {
        const Eigen::VectorXd term = std::pow(bound, f.degree() - 1) * f.influences().cwiseSqrt();
        out = out.cwiseMax(term);
    }
    return lead * out;
}

bool LindebergParams::constraint_holds(double beta) const {
    const double top = lambda.size() ? lambda.maxCoeff() : 0.0;
    return tau * rho * psi_bound * top <= 1.0 / beta;
}

LindebergParams lindeberg_params(const HomSumSystem& system, double alpha, double tau_factor, double rho_factor) {
    LindebergParams out;
    out.psi_bound = max_psi_norm(system, alpha);
    out.lambda = lambda_rates(system, alpha);
    const double log_d2 = std::log(static_cast<double>(system.size()) * system.size());
    out.tau = tau_factor * std::pow(log_d2, 1.0 / alpha);
    out.rho = rho_factor * std::pow(log_d2, (system.max_degree() - 1) / alpha);
    return out;
}

double InterpolationReport::mean_step_magnitude_sum() const {
    if (step_magnitude_sums.empty()) return 0.0;
    return std::accumulate(step_magnitude_sums.begin(), step_magnitude_sums.end(), 0.0) / step_magnitude_sums.size();
}

InterpolationReport interpolation_experiment(const HomSumSystem& system, std::span<const VariableSpec> y_laws,
                                             const InterpolationOptions& options) {
    const int n = system.dim(), d = system.size();
    if (static_cast<int>(y_laws.size()) != n) throw ArgumentError("replacement laws differ in length from the system");
    if (options.permutations < 1 || options.mc == 0) throw ArgumentError("need at least one permutation and draw");
    std::vector<Eigen::VectorXd> shifts = options.shifts;
    if (shifts.empty()) shifts.push_back(Eigen::VectorXd::Zero(d));
    for (const auto& s : shifts)
        if (s.size() != d) throw ArgumentError("shift has the wrong dimension");
    const auto n_shift = static_cast<int>(shifts.size());
    const auto n_perm = static_cast<std::size_t>(options.permutations);

    struct PermResult {
        std::vector<double> sum, sumsq;  // per shift, of psi(Q(X)) - psi(Q(Y))
        std::vector<double> steps;       // n_shift x n, summed step differences
    };
    std::vector<PermResult> results(n_perm);

    parallel_for_blocks(n_perm, options.threads, [&](std::size_t p) {
        auto rng = block_stream(options.seed, p);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<CoordinateSampler> xs, ys;
        for (const auto& c : system.coordinates()) xs.emplace_back(c);
        for (const auto& c : y_laws) ys.emplace_back(c);

        PermResult& r = results[p];
        r.sum.assign(n_shift, 0.0);
        r.sumsq.assign(n_shift, 0.0);
        r.steps.assign(static_cast<std::size_t>(n_shift) * n, 0.0);
        std::vector<double> x(n), w(n), q(d), buf(d), prev(n_shift), start(n_shift);
        const auto psi = [&](int s) {
            for (int k = 0; k < d; ++k) buf[k] = q[k] - shifts[s][k];
            return options.h(phi_beta(buf, options.beta));
        };
        for (std::size_t rep = 0; rep < options.mc; ++rep) {
            for (int i = 0; i < n; ++i) x[i] = xs[i](rng);
            for (int i = 0; i < n; ++i) w[i] = ys[i](rng);
            for (int k = 0; k < d; ++k) q[k] = system.kernel(k).evaluate(w);
            for (int s = 0; s < n_shift; ++s) start[s] = prev[s] = psi(s);
            for (int t = 0; t < n; ++t) {
                const int i = order[t];
                const double delta = x[i] - w[i];
                for (int k = 0; k < d; ++k) q[k] += delta * partial_at(system.kernel(k), w, i);
                w[i] = x[i];
                for (int s = 0; s < n_shift; ++s) {
                    const double v = psi(s);
                    r.steps[static_cast<std::size_t>(s) * n + t] += v - prev[s];
                    prev[s] = v;
                }
            }
            for (int s = 0; s < n_shift; ++s) {
                const double diff = prev[s] - start[s];
                r.sum[s] += diff;
                r.sumsq[s] += diff * diff;
            }
        }
    });

    InterpolationReport out;
    const double total = static_cast<double>(n_perm * options.mc);
    for (int s = 0; s < n_shift; ++s) {
        double sum = 0.0, sq = 0.0;
        for (const auto& r : results) {
            sum += r.sum[s];
            sq += r.sumsq[s];
        }
        const double mean = sum / total;
        if (s == 0 || std::abs(mean) > out.difference) {
            out.difference = std::abs(mean);
            out.difference_se = std::sqrt(std::max(0.0, sq / total - mean * mean) / total);
            out.worst_shift = s;
        }
    }
    out.mean_step_magnitude.assign(n, 0.0);
    const double per = static_cast<double>(options.mc);
    for (const auto& r : results) {
        double mag = 0.0, signed_total = 0.0;
        for (int t = 0; t < n; ++t) {
            const double m = r.steps[static_cast<std::size_t>(out.worst_shift) * n + t] / per;
            mag += std::abs(m);
            signed_total += m;
            out.mean_step_magnitude[t] += std::abs(m) / n_perm;
        }
        out.step_magnitude_sums.push_back(mag);
        out.permutation_totals.push_back(signed_total);
    }
    return out;
}

MomentMatchingContrast moment_matching_contrast(const HomSumSystem& system, const InterpolationOptions& options) {
    std::vector<VariableSpec> gaussian(system.dim(), VariableSpec::gaussian()), matched;
    for (const auto& c : system.coordinates()) matched.push_back(match_third_moment(c.moment(3)));
    MomentMatchingContrast out;
    out.two_moments = interpolation_experiment(system, gaussian, options);
    out.three_moments = interpolation_experiment(system, matched, options);
    return out;
}

}  // namespace homsum
