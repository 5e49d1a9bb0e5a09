#include "homsum/smoothmax.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "homsum/errors.hpp"
#include "homsum/rng.hpp"
#include "homsum/simulate.hpp"

namespace homsum {

double phi_beta(std::span<const double> x, double beta) {
    if (x.empty()) throw ArgumentError("smooth max of an empty vector");
    if (!(beta > 0.0)) throw ArgumentError("beta must be positive");
    const double top = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(beta * (v - top));
    return top + std::log(s) / beta;
}

PhiDerivatives phi_derivatives(std::span<const double> x, double beta, int order, int cap) {
    if (order < 1 || order > 3) throw ArgumentError("derivative order must be 1, 2 or 3");
    if (static_cast<int>(x.size()) > cap)
        throw ArgumentError("dimension " + std::to_string(x.size()) + " exceeds the derivative cap " +
                            std::to_string(cap));
    PhiDerivatives out;
    out.value = phi_beta(x, beta);
    const int d = static_cast<int>(x.size());
    out.pi.resize(d);
    for (int j = 0; j < d; ++j) out.pi[j] = std::exp(beta * (x[j] - out.value));
    out.pi /= out.pi.sum();
    const Eigen::VectorXd& pi = out.pi;
    if (order >= 2) {
        out.hessian = beta * (Eigen::MatrixXd(pi.asDiagonal()) - pi * pi.transpose());
    }
    if (order >= 3) {
        out.third.assign(static_cast<std::size_t>(d) * d * d, 0.0);
        const double b2 = beta * beta;
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l) {
                    double v = 2.0 * pi[j] * pi[k] * pi[l];
                    if (j == k) v -= pi[j] * pi[l];
                    if (j == l) v -= pi[j] * pi[k];
                    if (k == l) v -= pi[j] * pi[k];
                    if (j == k && k == l) v += pi[j];
                    out.third[(static_cast<std::size_t>(j) * d + k) * d + l] = b2 * v;
                }
    }
    return out;
}

double g0(double t) {
    if (t <= 0.0) return 1.0;
    if (t >= 1.0) return 0.0;
    const double u = 1.0 / (1.0 - t) - 1.0 / t;
    const double e = std::exp(-std::abs(u));
    return u > 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
}

double g0_derivative(double t, int k) {
    if (k < 0 || k > 3) throw ArgumentError("cutoff derivative order must be at most 3");
    if (k == 0) return g0(t);
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double u = 1.0 / (1.0 - t) - 1.0 / t;
    const double e = std::exp(-std::abs(u));
    const double s = u > 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
    const double p = e / ((1.0 + e) * (1.0 + e));  // s (1 - s)
    if (p == 0.0) return 0.0;
    // Logistic derivatives in u, then the chain rule through u(t).
    const double s1 = -p, s2 = p * (1.0 - 2.0 * s), s3 = -p * (1.0 - 6.0 * s + 6.0 * s * s);
    const double a = 1.0 - t;
    const double u1 = 1.0 / (a * a) + 1.0 / (t * t);
    if (k == 1) return s1 * u1;
    const double u2 = 2.0 / (a * a * a) - 2.0 / (t * t * t);
    if (k == 2) return s2 * u1 * u1 + s1 * u2;
    const double u3 = 6.0 / (a * a * a * a) + 6.0 / (t * t * t * t);
    return s3 * u1 * u1 * u1 + 3.0 * s2 * u1 * u2 + s1 * u3;
}

double g0_derivative_sup(int k, int grid) {
    if (k < 0 || k > 3) throw ArgumentError("cutoff derivative order must be at most 3");
    if (k == 0) return 1.0;
    if (grid < 10) throw ArgumentError("grid too coarse");
    const auto mag = [k](double t) { return std::abs(g0_derivative(t, k)); };
    int best = 0;
    double best_val = -1.0;
    for (int i = 0; i < grid; ++i) {
        const double v = mag((i + 0.5) / grid);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    // Golden-section refinement on the bracketing cells.
    double lo = std::max(best - 0.5, 1e-3) / grid, hi = std::min(best + 1.5, grid - 1e-3) / grid;
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - ratio * (hi - lo), d = lo + ratio * (hi - lo);
    double fc = mag(c), fd = mag(d);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        if (fc > fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = mag(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = mag(d);
        }
    }
    return std::max({best_val, fc, fd});
}

double g0_derivative_sup(int k) {
    static const std::array<double, 4> cached = [] {
        std::array<double, 4> s{};
        for (int j = 0; j < 4; ++j) s[j] = g0_derivative_sup(j, 100000);
        return s;
    }();
    if (k < 0 || k > 3) throw ArgumentError("cutoff derivative order must be at most 3");
    return cached[k];
}

double Cutoff::derivative(double t, int k) const {
    return std::pow(scale, k) * g0_derivative(scale * t + shift, k);
}

double Cutoff::derivative_sup(int k) const { return std::pow(std::abs(scale), k) * g0_derivative_sup(k); }

DerivativeSumCheck derivative_sum_bound_check(const Cutoff& h, double beta, std::span<const double> x, int m) {
    if (m < 1 || m > 3) throw ArgumentError("derivative order must be 1, 2 or 3");
    const PhiDerivatives phi = phi_derivatives(x, beta, m);
    const Eigen::VectorXd& pi = phi.pi;
    const int d = static_cast<int>(pi.size());
    const double h1 = h.derivative(phi.value, 1);
    DerivativeSumCheck out;
    if (m == 1) {
        out.lhs = (h1 * pi).cwiseAbs().sum();
    } else if (m == 2) {
        const double h2 = h.derivative(phi.value, 2);
        out.lhs = (h2 * pi * pi.transpose() + h1 * phi.hessian).cwiseAbs().sum();
    } else {
        const double h2 = h.derivative(phi.value, 2), h3 = h.derivative(phi.value, 3);
        const Eigen::MatrixXd& hs = phi.hessian;
        double s = 0.0;
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k)
                for (int l = 0; l < d; ++l)
                    s += std::abs(h3 * pi[j] * pi[k] * pi[l] +
                                  h2 * (hs(j, k) * pi[l] + hs(j, l) * pi[k] + hs(k, l) * pi[j]) +
                                  h1 * phi.third_at(j, k, l));
        out.lhs = s;
    }
    double worst = 0.0;
    for (int k = 1; k <= m; ++k) worst = std::max(worst, std::pow(beta, m - k) * h.derivative_sup(k));
    out.rhs = kDerivativeSumConstants[m - 1] * worst;
    return out;
}

Eigen::MatrixXd pooled_quantile_grid(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int levels,
                                     std::size_t cap, std::uint64_t seed) {
    if (a.rows() != b.rows()) throw ArgumentError("samples differ in dimension");
    if (levels < 1) throw ArgumentError("grid needs at least one level");
    const Eigen::Index d = a.rows();
    Eigen::MatrixXd quant(d, levels);
    std::vector<double> pooled;
    for (Eigen::Index r = 0; r < d; ++r) {
        pooled.assign(a.row(r).begin(), a.row(r).end());
        pooled.insert(pooled.end(), b.row(r).begin(), b.row(r).end());
        std::sort(pooled.begin(), pooled.end());
        for (int l = 0; l < levels; ++l) {
            const auto idx = static_cast<std::size_t>((l + 0.5) / levels * pooled.size());
            quant(r, l) = pooled[std::min(idx, pooled.size() - 1)];
        }
    }
    double product = 1.0;
    for (Eigen::Index r = 0; r < d; ++r) product *= levels;
    if (product <= static_cast<double>(cap)) {
        const auto count = static_cast<Eigen::Index>(product);
        Eigen::MatrixXd grid(d, count);
        for (Eigen::Index c = 0; c < count; ++c) {
            Eigen::Index code = c;
            for (Eigen::Index r = 0; r < d; ++r) {
                grid(r, c) = quant(r, code % levels);
                code /= levels;
            }
        }
        return grid;
    }
    std::mt19937_64 rng(splitmix64(seed));
    std::uniform_int_distribution<int> pick(0, levels - 1);
    Eigen::MatrixXd grid(d, static_cast<Eigen::Index>(cap));
    for (Eigen::Index c = 0; c < grid.cols(); ++c)
        for (Eigen::Index r = 0; r < d; ++r) grid(r, c) = quant(r, pick(rng));
    return grid;
}

SmoothDistance delta_epsilon_estimate(const Eigen::MatrixXd& f, const Eigen::MatrixXd& z, double eps,
                                      const Eigen::MatrixXd& grid, unsigned threads) {
    if (f.rows() != z.rows() || grid.rows() != f.rows()) throw ArgumentError("samples differ in dimension");
    if (!(eps > 0.0)) throw ArgumentError("epsilon must be positive");
    if (grid.cols() == 0) throw ArgumentError("empty evaluation grid");
    const Eigen::Index d = f.rows();
    const double beta = d > 1 ? std::log(static_cast<double>(d)) / eps : 1.0 / eps;
    const auto n_grid = static_cast<std::size_t>(grid.cols());
    std::vector<double> diff(n_grid), se(n_grid);
    const auto moments = [&](const Eigen::MatrixXd& s, const Eigen::VectorXd& y) {
        std::vector<double> buf(static_cast<std::size_t>(d));
        double sum = 0.0, sq = 0.0;
        for (Eigen::Index c = 0; c < s.cols(); ++c) {
            for (Eigen::Index r = 0; r < d; ++r) buf[r] = s(r, c) - y[r];
            const double v = g0(phi_beta(buf, beta) / eps);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / s.cols();
        return std::pair{mean, std::max(0.0, sq / s.cols() - mean * mean) / s.cols()};
    };
    parallel_for_blocks(n_grid, threads, [&](std::size_t g) {
        const Eigen::VectorXd y = grid.col(static_cast<Eigen::Index>(g));
        const auto [mf, vf] = moments(f, y);
        const auto [mz, vz] = moments(z, y);
        diff[g] = std::abs(mf - mz);
        se[g] = std::sqrt(vf + vz);
    });
    SmoothDistance out;
    for (std::size_t g = 0; g < n_grid; ++g)
        if (diff[g] > out.estimate) {
            out.estimate = diff[g];
            out.se = se[g];
        }
    return out;
}

AntiConcentration nazarov_check(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& x, double eps,
                                std::size_t mc, std::uint64_t seed, unsigned threads) {
    if (x.size() != covariance.rows()) throw ArgumentError("point and covariance differ in dimension");
    if (eps < 0.0) throw ArgumentError("epsilon must be nonnegative");
    if (mc == 0) throw ArgumentError("sample size must be positive");
    const GaussianFactor factor = gaussian_factor(covariance);
    if (factor.flagged) throw ArgumentError("covariance is not positive semidefinite");
    const double sigma_min = std::sqrt(covariance.diagonal().minCoeff());
    if (!(sigma_min > 0.0)) throw ArgumentError("every coordinate needs positive variance");

    const Eigen::Index d = covariance.rows();
    const std::size_t blocks = (mc + kSampleBlock - 1) / kSampleBlock;
    std::vector<std::size_t> hits(blocks, 0);
    parallel_for_blocks(blocks, threads, [&](std::size_t b) {
        auto rng = block_stream(seed, b);
        std::normal_distribution<double> normal;
        const std::size_t count = std::min(kSampleBlock, mc - b * kSampleBlock);
        Eigen::MatrixXd g(d, static_cast<Eigen::Index>(count));
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            for (Eigen::Index r = 0; r < d; ++r) g(r, c) = normal(rng);
        const Eigen::MatrixXd zs = factor.root * g;
        for (Eigen::Index c = 0; c < zs.cols(); ++c) {
            const bool upper = ((zs.col(c) - x).array() <= eps).all();
            const bool lower = ((zs.col(c) - x).array() <= 0.0).all();
            hits[b] += upper && !lower;
        }
    });
    std::size_t total = 0;
    for (auto h : hits) total += h;
    AntiConcentration out;
    const double p = static_cast<double>(total) / mc;
    out.lhs = p;
    out.se = std::sqrt(p * (1.0 - p) / mc);
    out.rhs = eps / sigma_min * (std::sqrt(2.0 * std::log(static_cast<double>(d))) + 2.0);
    return out;
}

}  // namespace homsum
