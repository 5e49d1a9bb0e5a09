#include "homsum/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <tuple>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/rng.hpp"

namespace homsum {

namespace {

std::size_t block_count(std::size_t mc) { return (mc + kSampleBlock - 1) / kSampleBlock; }

}  // namespace

Eigen::MatrixXd sample_Q(const HomSumSystem& system, std::size_t mc, std::uint64_t seed, unsigned threads) {
    const int d = system.size(), n = system.dim();
    Eigen::MatrixXd out(d, static_cast<Eigen::Index>(mc));
    parallel_for_blocks(block_count(mc), threads, [&](std::size_t b) {
        auto rng = block_stream(seed, b);
        std::vector<CoordinateSampler> samplers;
        samplers.reserve(n);
        for (const auto& c : system.coordinates()) samplers.emplace_back(c);
        std::vector<double> x(n);
        const std::size_t first = b * kSampleBlock, last = std::min(mc, first + kSampleBlock);
        for (std::size_t s = first; s < last; ++s) {
            for (int i = 0; i < n; ++i) x[i] = samplers[i](rng);
            for (int j = 0; j < d; ++j) out(j, static_cast<Eigen::Index>(s)) = system.kernel(j).evaluate(x);
        }
    });
    return out;
}

GaussianFactor gaussian_factor(const Eigen::MatrixXd& covariance, double clip_tolerance) {
    if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
        throw ArgumentError("covariance must be a nonempty square matrix");
    const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ArgumentError("covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(covariance);
    GaussianFactor out;
    const Eigen::VectorXd values = eig.eigenvalues();
    out.min_eigenvalue = values.minCoeff();
    out.flagged = out.min_eigenvalue < -clip_tolerance;
    const Eigen::VectorXd roots = values.cwiseMax(0.0).cwiseSqrt();
    out.root = eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
    return out;
}

Eigen::MatrixXd sample_gaussian(const GaussianFactor& factor, std::size_t mc, std::uint64_t seed, unsigned threads) {
    const Eigen::Index d = factor.root.rows();
    Eigen::MatrixXd out(d, static_cast<Eigen::Index>(mc));
    parallel_for_blocks(block_count(mc), threads, [&](std::size_t b) {
        auto rng = block_stream(seed, b);
        std::normal_distribution<double> normal;
        const std::size_t first = b * kSampleBlock, last = std::min(mc, first + kSampleBlock);
        Eigen::MatrixXd g(d, static_cast<Eigen::Index>(last - first));
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
        out.middleCols(static_cast<Eigen::Index>(first), g.cols()).noalias() = factor.root * g;
    });
    return out;
}

Eigen::MatrixXd sample_gaussian(const Eigen::MatrixXd& covariance, std::size_t mc, std::uint64_t seed,
                                unsigned threads) {
    return sample_gaussian(gaussian_factor(covariance), mc, seed, threads);
}

DistanceEstimate ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ArgumentError("two-sample statistic needs nonempty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    DistanceEstimate out;
    double best_fa = 0.0, best_fb = 0.0;
    while (i < x.size() || j < y.size()) {
        const double t = (j == y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
        while (i < x.size() && x[i] == t) ++i;
        while (j < y.size() && y[j] == t) ++j;
        const double fa = i / na, fb = j / nb;
        if (std::abs(fa - fb) > out.estimate) {
            out.estimate = std::abs(fa - fb);
            best_fa = fa;
            best_fb = fb;
        }
    }
    out.se = std::sqrt(best_fa * (1 - best_fa) / na + best_fb * (1 - best_fb) / nb);
    return out;
}

namespace {

std::vector<double> row_copy(const Eigen::MatrixXd& m, Eigen::Index r) {
    std::vector<double> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = m(r, c);
    return out;
}

double fraction_below(const Eigen::MatrixXd& m, const Eigen::VectorXd& x) {
    const Eigen::Index d = m.rows();
    std::size_t count = 0;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index r = 0;
        while (r < d && m(r, c) <= x[r]) ++r;
        count += r == d;
    }
    return static_cast<double>(count) / m.cols();
}

}  // namespace

DistanceEstimate kolmogorov_orthant(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const OrthantOptions& options) {
    if (a.rows() != b.rows()) throw ArgumentError("samples differ in dimension");
    if (a.cols() == 0 || b.cols() == 0) throw ArgumentError("two-sample statistic needs nonempty samples");
    if (a.rows() == 1) return ks_two_sample(row_copy(a, 0), row_copy(b, 0));

    const Eigen::Index d = a.rows();
    const std::size_t pooled = static_cast<std::size_t>(a.cols() + b.cols());
    std::vector<std::size_t> anchors(pooled);
    std::iota(anchors.begin(), anchors.end(), std::size_t{0});
    if (pooled > options.anchor_cap) {
        std::mt19937_64 rng(splitmix64(options.seed));
        for (std::size_t k = 0; k < options.anchor_cap; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, pooled - 1);
            std::swap(anchors[k], anchors[pick(rng)]);
        }
        anchors.resize(options.anchor_cap);
        std::sort(anchors.begin(), anchors.end());
    }
    const double na = static_cast<double>(a.cols()), nb = static_cast<double>(b.cols());
    DistanceEstimate out;
    for (std::size_t k : anchors) {
        const Eigen::VectorXd x = k < static_cast<std::size_t>(a.cols())
                                      ? Eigen::VectorXd(a.col(static_cast<Eigen::Index>(k)))
                                      : Eigen::VectorXd(b.col(static_cast<Eigen::Index>(k - a.cols())));
        const double fa = fraction_below(a, x), fb = fraction_below(b, x);
        if (std::abs(fa - fb) > out.estimate) {
            out.estimate = std::abs(fa - fb);
            out.se = std::sqrt(fa * (1 - fa) / na + fb * (1 - fb) / nb);
        }
    }
    if (options.diagonal_anchors) {
        // {A <= t s} is the event max_j A_j / s_j <= t.
        Eigen::VectorXd sd(d);
        for (Eigen::Index r = 0; r < d; ++r) {
            const double mean = (a.row(r).sum() + b.row(r).sum()) / pooled;
            const double sq = (a.row(r).array() - mean).square().sum() + (b.row(r).array() - mean).square().sum();
            sd[r] = sq > 0.0 ? std::sqrt(sq / pooled) : 1.0;
        }
        const auto scaled_max = [&](const Eigen::MatrixXd& m) {
            std::vector<double> out_max(static_cast<std::size_t>(m.cols()));
            for (Eigen::Index c = 0; c < m.cols(); ++c) out_max[c] = (m.col(c).array() / sd.array()).maxCoeff();
            return out_max;
        };
        const auto diag = ks_two_sample(scaled_max(a), scaled_max(b));
        if (diag.estimate > out.estimate) out = diag;
    }
    return out;
}

DistanceEstimate kolmogorov_max_stat(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) throw ArgumentError("samples differ in dimension");
    const auto max_abs = [](const Eigen::MatrixXd& m) {
        std::vector<double> out(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = m.col(c).cwiseAbs().maxCoeff();
        return out;
    };
    return ks_two_sample(max_abs(a), max_abs(b));
}

Kappa4Estimate kappa4_mc(const SymmetricKernel& f, std::span<const VariableSpec> coordinates, std::size_t mc,
                         std::uint64_t seed, unsigned threads) {
    constexpr int kGroups = 20;
    if (mc < static_cast<std::size_t>(kGroups)) throw ArgumentError("kappa4 sampling needs at least 20 draws");
    const HomSumSystem one({f}, std::vector<VariableSpec>(coordinates.begin(), coordinates.end()));
    const Eigen::MatrixXd q = sample_Q(one, mc, seed, threads);
    std::vector<double> s2(kGroups, 0.0), s4(kGroups, 0.0), count(kGroups, 0.0);
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        const int g = static_cast<int>(c * kGroups / q.cols());
        const double v2 = q(0, c) * q(0, c);
        s2[g] += v2;
        s4[g] += v2 * v2;
        count[g] += 1.0;
    }
    const double t2 = std::accumulate(s2.begin(), s2.end(), 0.0), t4 = std::accumulate(s4.begin(), s4.end(), 0.0);
    const double total = static_cast<double>(mc);
    Kappa4Estimate out;
    const double m2 = t2 / total;
    out.value = t4 / total - 3.0 * m2 * m2;
    std::vector<double> leave(kGroups);
    for (int g = 0; g < kGroups; ++g) {
        const double n = total - count[g];
        const double l2 = (t2 - s2[g]) / n;
        leave[g] = (t4 - s4[g]) / n - 3.0 * l2 * l2;
    }
    const double mean = std::accumulate(leave.begin(), leave.end(), 0.0) / kGroups;
    double ss = 0.0;
    for (double v : leave) ss += (v - mean) * (v - mean);
    out.se = std::sqrt((kGroups - 1.0) / kGroups * ss);
    return out;
}

BoundRates bound_rates(const HomSumSystem& system, double alpha, const BoundOptions& options) {
    if (!(alpha > 0.0)) throw ArgumentError("alpha must be positive");
    BoundRates out;
    out.alpha = alpha;
    const auto& coords = system.coordinates();
    const int d = system.size();

    bool symmetric = true;
    std::vector<const VariableSpec*> distinct;
    for (const auto& c : coords) {
        symmetric = symmetric && std::abs(c.moment(3)) <= 1e-14;
        out.a_bar = std::max(out.a_bar, std::abs(c.moment(3)));
        if (std::none_of(distinct.begin(), distinct.end(), [&](const VariableSpec* s) { return *s == c; }))
            distinct.push_back(&c);
    }
    out.w = options.w.value_or(symmetric ? 0.5 : 1.0);
    for (const auto* s : distinct) out.b_bar = std::max(out.b_bar, psi_alpha_norm(*s, alpha));

    const int qbar = system.max_degree();
    out.mu = std::max(2.0 / 3.0 * out.w * qbar - 1.0 / 6.0, 2.0 * (qbar - 1) / (3.0 * alpha) + 1.0 / 3.0);
    out.delta0 = (system.gram() - system.target()).cwiseAbs().maxCoeff();

    std::vector<double> term(d), norm(d), minf(d);
    double se2 = 0.0;
    bool quadratic = true;
    double max_trace = 0.0, max_spread = 0.0;
    for (int k = 0; k < d; ++k) {
        const auto& f = system.kernel(k);
        double k4;
        try {
            k4 = kappa4(f, coords, options.moments);
        } catch (const ResourceError&) {
            if (!options.allow_mc) throw;
            const auto est = kappa4_mc(f, coords, options.mc, splitmix64(options.seed + k), options.moments.threads);
            k4 = est.value;
            se2 = std::max(se2, est.se * est.se);
            out.kappa4_estimated = true;
        }
        out.kappa4_max = std::max(out.kappa4_max, std::abs(k4));
        norm[k] = f.norm();
        minf[k] = f.max_influence();
        out.minf_max = std::max(out.minf_max, minf[k]);
        term[k] = std::abs(k4) + std::pow(out.a_bar, 4 * f.degree()) * f.influences().squaredNorm();
        if (f.degree() == 2) {
            max_trace = std::max(max_trace, std::sqrt(std::max(0.0, trace_fourth_power(f))));
            max_spread = std::max(max_spread, std::sqrt(minf[k]) * norm[k]);
        } else {
            quadratic = false;
        }
    }
    out.kappa4_se = std::sqrt(se2);
    out.delta_n = quadratic ? max_trace + max_spread : std::numeric_limits<double>::quiet_NaN();

    double inner_max = 0.0;
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            const int qj = system.kernel(j).degree(), qk = system.kernel(k).degree();
            if (qj == qk) inner_max = std::max(inner_max, std::sqrt(term[k]));
            if (qj < qk) inner_max = std::max(inner_max, std::pow(out.a_bar, qj) * norm[j] * std::pow(term[k], 0.25));
        }
    out.delta1 = std::pow(out.a_bar, 2.0 * out.w * qbar - 1.0) * inner_max;

    const double log_d = std::log(static_cast<double>(d));
    double spread = 0.0;
    for (int k = 0; k < d; ++k)
        spread = std::max(spread, std::pow(out.b_bar, system.kernel(k).degree()) * std::sqrt(minf[k]));
    out.influence_term = std::pow(log_d, (2.0 * qbar - 1.0) / alpha + 1.5) * spread;
    out.composite = std::pow(log_d, 2.0 / 3.0) * std::cbrt(out.delta0) +
                    std::pow(log_d, out.mu + 0.5) * std::cbrt(out.delta1) + out.influence_term;
    return out;
}

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw ArgumentError("line fit needs two or more points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx == 0.0) throw ArgumentError("line fit needs distinct abscissae");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

RateStudy rate_conformance_study(std::span<const HomSumSystem> ladder, const StudyOptions& options) {
    if (ladder.size() < 4) throw ArgumentError("degenerate ladder: need at least four sizes");
    for (std::size_t i = 1; i < ladder.size(); ++i)
        if (ladder[i].dim() <= ladder[i - 1].dim())
            throw ArgumentError("degenerate ladder: sizes must increase strictly");

    RateStudy out;
    for (const auto& system : ladder) {
        const auto start = std::chrono::steady_clock::now();
        StudyPoint point;
        point.n = system.dim();
        point.d = system.size();
        const std::uint64_t base = splitmix64(options.seed ^ static_cast<std::uint64_t>(point.n));
        const Eigen::MatrixXd qs = sample_Q(system, options.mc, splitmix64(base + 1), options.threads);
        const Eigen::MatrixXd zs = sample_gaussian(system.target(), options.mc, splitmix64(base + 2), options.threads);
        OrthantOptions orthant = options.orthant;
        orthant.seed = splitmix64(base + 3);
        point.distance = options.max_statistic ? kolmogorov_max_stat(qs, zs) : kolmogorov_orthant(qs, zs, orthant);
        BoundOptions bounds = options.bounds;
        bounds.seed = splitmix64(base + 4);
        point.rates = bound_rates(system, options.alpha, bounds);
        point.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        out.points.push_back(point);
    }

    std::vector<double> lx, ly;
    for (const auto& p : out.points) {
        if (p.rates.composite > 0.0)
            out.fitted_constant = std::max(out.fitted_constant, p.distance.estimate / p.rates.composite);
        if (p.distance.estimate > 0.0 && p.rates.composite > 0.0) {
            lx.push_back(std::log(p.rates.composite));
            ly.push_back(std::log(p.distance.estimate));
        }
    }
    if (lx.size() >= 2) {
        try {
            std::tie(out.slope, out.intercept) = fit_line(lx, ly);
        } catch (const ArgumentError&) {
            out.slope = out.intercept = std::numeric_limits<double>::quiet_NaN();
        }
    } else {
        out.slope = out.intercept = std::numeric_limits<double>::quiet_NaN();
    }
    out.monotone = true;
    for (std::size_t i = 1; i < out.points.size(); ++i) {
        const auto& prev = out.points[i - 1].distance;
        const auto& cur = out.points[i].distance;
        if (cur.estimate > prev.estimate + 2.0 * std::hypot(prev.se, cur.se)) out.monotone = false;
    }
    out.within_fitted = true;
    for (const auto& p : out.points)
        if (p.distance.estimate > out.fitted_constant * p.rates.composite * (1.0 + 1e-12)) out.within_fitted = false;
    return out;
}

WassersteinCheck wasserstein_kolmogorov_check_1d(std::span<const double> a, std::span<const double> b,
                                                 double sigma_min) {
    if (!(sigma_min > 0.0)) throw ArgumentError("sigma must be positive");
    if (a.empty() || b.empty()) throw ArgumentError("two-sample statistic needs nonempty samples");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    // W1 = integral of |F_a - F_b| between consecutive pooled points.
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    CompensatedSum w1;
    double prev = std::min(x.front(), y.front());
    while (i < x.size() || j < y.size()) {
        const double t = (j == y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
        w1 += std::abs(i / na - j / nb) * (t - prev);
        prev = t;
        while (i < x.size() && x[i] == t) ++i;
        while (j < y.size() && y[j] == t) ++j;
    }
    WassersteinCheck out;
    out.w1 = w1.value();
    out.kolmogorov = ks_two_sample(a, b).estimate;
    out.rhs = std::sqrt(2.0 * 2.0 / sigma_min * out.w1);
    return out;
}

MomentGrowth moment_growth_diagnostic(const HomSumSystem& system, int kernel, double alpha, std::span<const double> p,
                                      std::size_t mc, std::uint64_t seed, unsigned threads) {
    if (p.size() < 2) throw ArgumentError("moment growth needs two or more exponents");
    for (double v : p)
        if (v != 2.0 && v != 4.0 && v != 6.0 && v != 8.0) throw ArgumentError("moment exponents must lie in {2,4,6,8}");
    const HomSumSystem one({system.kernel(kernel)}, system.coordinates());
    const Eigen::MatrixXd q = sample_Q(one, mc, seed, threads);
    MomentGrowth out;
    std::vector<double> lp, ln;
    for (double v : p) {
        CompensatedSum s;
        for (Eigen::Index c = 0; c < q.cols(); ++c) s += std::pow(std::abs(q(0, c)), v);
        const double norm = std::pow(s.value() / q.cols(), 1.0 / v);
        out.p.push_back(v);
        out.norms.push_back(norm);
        lp.push_back(std::log(v));
        ln.push_back(std::log(norm));
    }
    out.slope = fit_line(lp, ln).first;
    out.limit = system.kernel(kernel).degree() / alpha + 0.5;
    return out;
}

ResultRecord make_record(const std::string& id, const HomSumSystem& system, std::size_t mc, std::uint64_t seed,
                         const DistanceEstimate& distance, const BoundRates& rates, double wall_ms) {
    ResultRecord r;
    r.exp_id = id;
    r.n = system.dim();
    r.d = system.size();
    for (const auto& f : system.kernels()) r.qlist.push_back(f.degree());
    r.mc = mc;
    r.seed = seed;
    r.dist = distance.estimate;
    r.dist_se = distance.se;
    r.delta0 = rates.delta0;
    r.delta1 = rates.delta1;
    r.delta_n = rates.delta_n;
    r.kappa4_max = rates.kappa4_max;
    r.minf_max = rates.minf_max;
    r.composite = rates.composite;
    r.wall_ms = wall_ms;
    return r;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_qlist(const std::vector<int>& q) {
    // Runs of equal degrees are written as degree x count to keep wide systems readable.
    std::string out;
    for (std::size_t i = 0; i < q.size();) {
        std::size_t j = i;
        while (j < q.size() && q[j] == q[i]) ++j;
        if (!out.empty()) out += ';';
        out += std::to_string(q[i]);
        if (j - i > 1) out += 'x' + std::to_string(j - i);
        i = j;
    }
    return out;
}

}  // namespace

void write_records(std::ostream& out, std::span<const ResultRecord> records) {
    out << kResultHeader << '\n';
    for (const auto& r : records) {
        out << r.exp_id << ',' << r.n << ',' << r.d << ',' << format_qlist(r.qlist) << ',' << r.mc << ',' << r.seed
            << ',' << format_double(r.dist) << ',' << format_double(r.dist_se) << ',' << format_double(r.delta0) << ','
            << format_double(r.delta1) << ',' << format_double(r.delta_n) << ',' << format_double(r.kappa4_max)
            << ',' << format_double(r.minf_max) << ',' << format_double(r.composite) << ','
            << format_double(r.wall_ms) << '\n';
    }
}

}  // namespace homsum
