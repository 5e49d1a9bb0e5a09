#include "homsum/gammacalc.hpp"

#include <algorithm>
#include <cmath>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/rng.hpp"

namespace homsum {

GammaCalcContext::GammaCalcContext(std::vector<VariableSpec> coordinates) : coordinates_(std::move(coordinates)) {
    for (const auto& c : coordinates_) {
        switch (c.law()) {
            case Law::Gaussian:
                v_.push_back(2.0);
                eta_.push_back(1.0);
                skew_.push_back(0.0);
                break;
            case Law::GammaPlus:
            case Law::GammaMinus: {
                const double nu = c.shape();
                v_.push_back(2.0 * (1.0 + 1.0 / nu));
                eta_.push_back(std::min(1.0, std::sqrt(nu)));
                skew_.push_back(c.moment(3));
                break;
            }
            default:
                throw ArgumentError("Gamma calculus needs Gaussian or standardized gamma coordinates, got " +
                                    c.to_string());
        }
    }
}

double GammaCalcContext::v_max() const { return v_.empty() ? 2.0 : *std::max_element(v_.begin(), v_.end()); }
double GammaCalcContext::eta_min() const {
    return eta_.empty() ? 1.0 : *std::min_element(eta_.begin(), eta_.end());
}
double GammaCalcContext::w_star() const {
    for (const auto& c : coordinates_)
        if (c.law() != Law::Gaussian) return 1.0;
    return 0.5;
}

ChaosDecomposition::ChaosDecomposition(const GammaCalcContext& ctx, const SymmetricKernel& f,
                                       const SymmetricKernel& g)
    : top_(f.degree() + g.degree()) {
    if (f.dim() != ctx.dim() || g.dim() != ctx.dim()) throw ArgumentError("kernel dim mismatch");
    for (int i = 0; i < ctx.dim(); ++i) v_.push_back(ctx.v(i));
    const double weight = factorial(f.degree()) * factorial(g.degree());

    // Y_i^2 = p2(Y_i) + s_i Y_i + 1 on every shared index.
    std::vector<int> shared;
    std::vector<std::uint32_t> single;
    Key key;
    for (std::size_t a = 0; a < f.nnz(); ++a) {
        const auto s = f.tuple(a);
        for (std::size_t b = 0; b < g.nnz(); ++b) {
            const auto t = g.tuple(b);
            shared.clear();
            single.clear();
            std::size_t x = 0, y = 0;
            while (x < s.size() || y < t.size()) {
                if (y == t.size() || (x < s.size() && s[x] < t[y]))
                    single.push_back(2u * s[x++]);
                else if (x == s.size() || t[y] < s[x])
                    single.push_back(2u * t[y++]);
                else {
                    shared.push_back(s[x]);
                    ++x;
                    ++y;
                }
            }
            const double base = weight * f.value(a) * g.value(b);
            int combos = 1;
            for (std::size_t k = 0; k < shared.size(); ++k) combos *= 3;
            for (int c = 0; c < combos; ++c) {
                key.assign(single.begin(), single.end());
                double coef = base;
                int code = c;
                for (int i : shared) {
                    const int choice = code % 3;
                    code /= 3;
                    if (choice == 0) {
                        key.push_back(2u * i + 1u);  // p2
                    } else if (choice == 1) {
                        coef *= ctx.skew(i);  // Y
                        key.push_back(2u * i);
                    }
                }
                if (coef == 0.0) continue;
                std::sort(key.begin(), key.end());
                coef_[key] += coef;
            }
        }
    }
}

double ChaosDecomposition::norm_weight(const Key& key) const {
    double w = 1.0;
    for (auto code : key)
        if (code & 1u) w *= v_[code >> 1];
    return w;
}

int ChaosDecomposition::degree_of(const Key& key) {
    int deg = 0;
    for (auto code : key) deg += (code & 1u) ? 2 : 1;
    return deg;
}

double ChaosDecomposition::mean() const {
    const auto it = coef_.find(Key{});
    return it == coef_.end() ? 0.0 : it->second;
}

std::vector<double> ChaosDecomposition::level_energies() const {
    std::vector<CompensatedSum> acc(top_ + 1);
    for (const auto& [key, c] : coef_) acc[degree_of(key)] += c * c * norm_weight(key);
    std::vector<double> out;
    for (const auto& a : acc) out.push_back(a.value());
    return out;
}

std::vector<double> ChaosDecomposition::cross_energies(const ChaosDecomposition& other) const {
    std::vector<CompensatedSum> acc(std::max(top_, other.top_) + 1);
    for (const auto& [key, c] : coef_) {
        const auto it = other.coef_.find(key);
        if (it != other.coef_.end()) acc[degree_of(key)] += c * it->second * norm_weight(key);
    }
    std::vector<double> out;
    for (const auto& a : acc) out.push_back(a.value());
    return out;
}

std::vector<double> var_Jk(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g) {
    return ChaosDecomposition(ctx, f, g).level_energies();
}

namespace {

// Visits every ordered tuple of `len` distinct indices from [0, n).
template <class Fn>
void for_each_distinct_tuple(int n, int len, std::vector<int>& tuple, std::vector<char>& used, int pos, Fn&& fn) {
    if (pos == len) {
        fn(tuple);
        return;
    }
    for (int i = 0; i < n; ++i) {
        if (used[i]) continue;
        used[i] = 1;
        tuple[pos] = i;
        for_each_distinct_tuple(n, len, tuple, used, pos + 1, fn);
        used[i] = 0;
    }
}

}  // namespace

double top_level_energy(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.dim() != ctx.dim() || g.dim() != ctx.dim()) throw ArgumentError("kernel dim mismatch");
    const int p = f.degree(), q = g.degree(), n = f.dim();
    const std::vector<double> fd = f.dense(), gd = g.dense();
    CompensatedSum total;
    for (int r = 0; r <= std::min(p, q); ++r) {
        const int free = p + q - 2 * r, len = p + q - r;
        if (len > n) continue;
        const auto shuffles = subsets_of_size(free, p - r);
        const double rc = factorial(r) * binomial(p, r) * binomial(q, r);
        const double coefficient = rc * rc * factorial(free) * factorial(r);
        CompensatedSum level;
        std::vector<int> tuple(len);
        std::vector<char> used(n, 0);
        for_each_distinct_tuple(n, len, tuple, used, 0, [&](const std::vector<int>& t) {
            double sym = 0.0;
            for (std::uint32_t mask : shuffles) {
                std::size_t fi = 0, gi = 0;
                for (int s = 0; s < free; ++s) {
                    if (mask >> s & 1u)
                        fi = fi * n + t[s];
                    else
                        gi = gi * n + t[s];
                }
                for (int s = free; s < len; ++s) {
                    fi = fi * n + t[s];
                    gi = gi * n + t[s];
                }
                sym += fd[fi] * gd[gi];
            }
            sym /= static_cast<double>(shuffles.size());
            double w = sym * sym;
            for (int s = free; s < len; ++s) w *= ctx.v(t[s]);
            level += w;
        });
        total += coefficient * level.value();
    }
    return total.value();
}

double gamma_variance(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g) {
    const auto energy = var_Jk(ctx, f, g);
    const int top = f.degree() + g.degree();
    CompensatedSum s;
    for (int k = 1; k < top; ++k) {
        const double c = 0.5 * (top - k);
        s += c * c * energy[k];
    }
    return s.value();
}

namespace {

Eigen::VectorXd gradient(const SymmetricKernel& f, std::span<const double> y) {
    const int n = f.dim();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n);
    const double w = factorial(f.degree());
    for (std::size_t e = 0; e < f.nnz(); ++e) {
        const auto t = f.tuple(e);
        for (int i : t) {
            double prod = f.value(e);
            for (int j : t)
                if (j != i) prod *= y[j];
            grad[i] += prod;
        }
    }
    return w * grad;
}

Eigen::VectorXd carre_weights(const GammaCalcContext& ctx, std::span<const double> y) {
    Eigen::VectorXd c(ctx.dim());
    for (int i = 0; i < ctx.dim(); ++i) {
        const auto& spec = ctx.coordinates()[i];
        switch (spec.law()) {
            case Law::GammaPlus:
                c[i] = 1.0 + y[i] / std::sqrt(spec.shape());
                break;
            case Law::GammaMinus:
                c[i] = 1.0 - y[i] / std::sqrt(spec.shape());
                break;
            default:
                c[i] = 1.0;
        }
    }
    return c;
}

// d/dy_i Q(f; y) as a sum of degree q-1 (q >= 2), kernel q f(i, .).
SymmetricKernel derivative_kernel(const SymmetricKernel& f, int i) {
    std::vector<SymmetricKernel::Entry> entries;
    for (std::size_t e : f.entries_touching(i)) {
        SymmetricKernel::Entry en{{}, f.degree() * f.value(e)};
        for (int j : f.tuple(e))
            if (j != i) en.indices.push_back(j);
        entries.push_back(std::move(en));
    }
    return SymmetricKernel(f.degree() - 1, f.dim(), std::move(entries));
}

}  // namespace

double gamma_pathwise(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g,
                      std::span<const double> y) {
    if (static_cast<int>(y.size()) != ctx.dim()) throw ArgumentError("sample has wrong dimension");
    const Eigen::VectorXd df = gradient(f, y), dg = gradient(g, y);
    return (carre_weights(ctx, y).array() * df.array() * dg.array()).sum();
}

double gamma_mean(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.dim() != ctx.dim() || g.dim() != ctx.dim()) throw ArgumentError("kernel dim mismatch");
    // The carre weight 1 +- y_i/sqrt(nu) is independent of both partials, which
    // do not involve y_i, and its mean is one.
    CompensatedSum s;
    for (int i = 0; i < ctx.dim(); ++i) {
        if (f.degree() == 1 || g.degree() == 1) {
            if (f.degree() == 1 && g.degree() == 1) s += f({i}) * g({i});
            continue;  // a linear factor times a centered sum has mean zero
        }
        const SymmetricKernel df = derivative_kernel(f, i), dg = derivative_kernel(g, i);
        const SymmetricKernel* pair[] = {&df, &dg};
        s += product_moment(pair, ctx.coordinates());
    }
    return s.value();
}

SteinTerms prop52_bound_terms(const GammaCalcContext& ctx, const HomSumSystem& system) {
    if (system.dim() != ctx.dim()) throw ArgumentError("kernel dim mismatch");
    const int d = system.size();
    SteinTerms out;
    out.delta0 = (system.gram() - system.target()).cwiseAbs().maxCoeff();
    std::vector<double> k4(d), l4(d), inf2(d);
    for (int j = 0; j < d; ++j) {
        const auto& f = system.kernel(j);
        k4[j] = kappa4(f, ctx.coordinates());
        const double m2 = factorial(f.degree()) * f.norm_squared();
        l4[j] = std::pow(std::max(k4[j] + 3.0 * m2 * m2, 0.0), 0.25);
        inf2[j] = f.influences().squaredNorm();
    }
    const double log_d = std::log(static_cast<double>(d));
    const double vbar = ctx.v_max();
    for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k) {
            const int qj = system.kernel(j).degree(), qk = system.kernel(k).degree();
            double bracket = 0.0;
            if (qj < qk) bracket = l4[j] * std::pow(std::max(k4[k], 0.0), 0.25);
            if (qj == qk)
                bracket = std::sqrt(std::max(0.0, 2.0 * k4[j] + (std::pow(2.0, -qj) * std::pow(vbar, qj) - 1.0) *
                                                                      factorial(2 * qj) * offdiag_constant(qj) *
                                                                      inf2[j]));
            const double scale = std::pow(log_d / ctx.eta_min(), ctx.w_star() * (qj + qk) - 1.0);
            out.delta2 = std::max(out.delta2, scale * bracket);
        }
    return out;
}

MonteCarloEstimate stein_discrepancy_mc(const GammaCalcContext& ctx, const HomSumSystem& system, std::size_t mc,
                                        std::uint64_t seed, unsigned threads) {
    if (system.dim() != ctx.dim()) throw ArgumentError("kernel dim mismatch");
    constexpr std::size_t kBlock = 1024;
    const std::size_t blocks = (mc + kBlock - 1) / kBlock;
    const int d = system.size(), n = system.dim();
    std::vector<double> sums(blocks, 0.0), squares(blocks, 0.0);
    const Eigen::MatrixXd& target = system.target();
    parallel_for_blocks(blocks, threads, [&](std::size_t b) {
        auto rng = block_stream(seed, b);
        std::vector<CoordinateSampler> samplers;
        for (const auto& c : ctx.coordinates()) samplers.emplace_back(c);
        std::vector<double> y(n);
        Eigen::MatrixXd grads(d, n);
        const std::size_t count = std::min(kBlock, mc - b * kBlock);
        for (std::size_t s = 0; s < count; ++s) {
            for (int i = 0; i < n; ++i) y[i] = samplers[i](rng);
            for (int j = 0; j < d; ++j) grads.row(j) = gradient(system.kernel(j), y).transpose();
            const Eigen::VectorXd c = carre_weights(ctx, y);
            const Eigen::MatrixXd gam = grads * c.asDiagonal() * grads.transpose();
            double worst = 0.0;
            for (int j = 0; j < d; ++j)
                for (int k = 0; k < d; ++k)
                    worst = std::max(worst, std::abs(gam(j, k) / system.kernel(k).degree() - target(j, k)));
            sums[b] += worst;
            squares[b] += worst * worst;
        }
    });
    double s = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        s += sums[b];
        s2 += squares[b];
    }
    MonteCarloEstimate out;
    out.mean = s / mc;
    out.se = std::sqrt(std::max(0.0, s2 / mc - out.mean * out.mean) / mc);
    return out;
}

ZhengReport zheng_inequalities_check(const GammaCalcContext& ctx, const SymmetricKernel& f, const SymmetricKernel& g,
                                     const MomentOptions& options) {
    const int p = f.degree(), q = g.degree();
    ZhengReport out;

    const auto fg = var_Jk(ctx, f, g);
    CompensatedSum low;
    for (int k = 1; k < p + q; ++k) low += fg[k];
    out.covariance.lhs = low.value();
    const SymmetricKernel* ffgg[] = {&f, &f, &g, &g};
    const double m22 = product_moment(ffgg, ctx.coordinates(), options);
    const double ef2 = factorial(p) * f.norm_squared(), eg2 = factorial(q) * g.norm_squared();
    const double efg = p == q ? factorial(p) * inner(f, g) : 0.0;
    out.covariance.rhs = m22 - ef2 * eg2 - 2.0 * efg * efg;

    const auto ff = var_Jk(ctx, f, f);
    CompensatedSum var;
    for (int k = 1; k < 2 * p; ++k) var += ff[k];
    for (int r = 1; r < p; ++r) {
        const double b = binomial(p, r);
        var += factorial(p) * factorial(p) * b * b * contract(f, f, r).values.norm_squared();
    }
    out.variance.lhs = var.value();
    out.variance.rhs = kappa4(f, ctx.coordinates(), options);
    return out;
}

KeyInequalities key_inequalities_check(const GammaCalcContext& ctx, const SymmetricKernel& f,
                                       const SymmetricKernel& g) {
    const int p = f.degree(), q = g.degree();
    KeyInequalities out;
    const auto energy = var_Jk(ctx, f, g);
    out.top_energy.lhs = factorial(p + q) * symmetric_product(f, g).norm_squared();
    out.top_energy.rhs = energy[p + q];
    if (p == q) {
        out.has_cross = true;
        const ChaosDecomposition ff(ctx, f, f), gg(ctx, g, g);
        const double cross = ff.cross_energies(gg)[2 * p];
        const double gaussian = factorial(2 * p) * inner(symmetric_product(f, f), symmetric_product(g, g));
        out.cross.lhs = std::abs(cross - gaussian);
        out.cross.rhs = (std::pow(2.0, -p) * std::pow(ctx.v_max(), p) - 1.0) * factorial(2 * p) *
                        offdiag_constant(p) * f.influences().norm() * g.influences().norm();
    }
    return out;
}

Hypercontractivity hypercontractivity_constants(double nu, int k) {
    if (!(nu > 0.0)) throw ArgumentError("shape must be positive");
    if (k < 1) throw ArgumentError("chaos order must be at least 1");
    const auto rising = [k](double a) {
        double s = 1.0;
        for (int j = 0; j < k; ++j) s *= (a + j) / (j + 1);
        return s;
    };
    Hypercontractivity out;
    out.sigma2 = rising(nu);
    out.eta = std::min(1.0, std::sqrt(out.sigma2 / rising(0.5)));
    return out;
}

}  // namespace homsum
