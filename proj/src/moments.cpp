#include "homsum/moments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"
#include "homsum/rng.hpp"

namespace homsum {

HomSumSystem::HomSumSystem(std::vector<SymmetricKernel> kernels, std::vector<VariableSpec> coordinates,
                           std::optional<Eigen::MatrixXd> target)
    : kernels_(std::move(kernels)), coordinates_(std::move(coordinates)) {
    if (kernels_.empty()) throw ArgumentError("system needs at least one kernel");
    for (const auto& f : kernels_)
        if (f.dim() != kernels_.front().dim()) throw ArgumentError("kernel dim mismatch");
    if (static_cast<int>(coordinates_.size()) != dim())
        throw ArgumentError("kernel dim mismatch: " + std::to_string(coordinates_.size()) +
                            " coordinate laws for N = " + std::to_string(dim()));
    if (target) {
        if (target->rows() != size() || target->cols() != size())
            throw ArgumentError("target covariance must be d x d");
        if (!target->isApprox(target->transpose(), 1e-12) && (*target - target->transpose()).norm() > 1e-12)
            throw ArgumentError("target covariance must be symmetric");
        target_ = *target;
        explicit_target_ = true;
    } else {
        target_ = gram();
    }
}

int HomSumSystem::max_degree() const {
    int q = 0;
    for (const auto& f : kernels_) q = std::max(q, f.degree());
    return q;
}

Eigen::MatrixXd HomSumSystem::gram() const {
    const int d = size();
    Eigen::MatrixXd c(d, d);
    for (int j = 0; j < d; ++j)
        for (int k = j; k < d; ++k) {
            const auto& f = kernels_[j];
            const auto& g = kernels_[k];
            c(j, k) = f.degree() == g.degree() ? factorial(f.degree()) * inner(f, g) : 0.0;
            c(k, j) = c(j, k);
        }
    return c;
}

namespace {

class ProductExpansion {
public:
    ProductExpansion(std::span<const SymmetricKernel* const> factors, std::span<const VariableSpec> coords)
        : factors_(factors), n_(factors.front()->dim()), mult_(n_, 0) {
        max_mult_ = static_cast<int>(factors_.size());
        moments_.resize(static_cast<std::size_t>(n_) * (max_mult_ + 1));
        for (int i = 0; i < n_; ++i)
            for (int k = 0; k <= max_mult_; ++k) {
                // Multiplicities never exceed the number of factors.
                moments_[i * (max_mult_ + 1) + k] = k <= coords[i].moments().max_order()
                                                        ? coords[i].moments()[k]
                                                        : std::numeric_limits<double>::quiet_NaN();
            }
        remaining_.assign(factors_.size() + 1, 0);
        for (int t = static_cast<int>(factors_.size()) - 1; t >= 0; --t)
            remaining_[t] = remaining_[t + 1] + factors_[t]->degree();
        weight_ = 1.0;
        for (const auto* f : factors_) weight_ *= factorial(f->degree());
    }

    // Sum over all branches whose first factor uses entry `first`.
    double branch(std::size_t first) {
        acc_ = CompensatedSum{};
        const auto* f = factors_.front();
        place(f->tuple(first));
        if (singles_ <= remaining_[1]) descend(1, f->value(first));
        unplace(f->tuple(first));
        return weight_ * acc_.value();
    }

private:
    void place(std::span<const int> t) {
        for (int i : t) {
            const int m = mult_[i]++;
            if (m == 0) {
                ++singles_;
                touched_.push_back(i);
            } else if (m == 1) {
                --singles_;
            }
        }
    }
    void unplace(std::span<const int> t) {
        for (int i : t) {
            const int m = --mult_[i];
            if (m == 0) {
                --singles_;
                // Indices leave in reverse order of arrival within a branch.
                touched_.erase(std::find(touched_.rbegin(), touched_.rend(), i).base() - 1);
            } else if (m == 1) {
                ++singles_;
            }
        }
    }

    void descend(std::size_t t, double coef) {
        if (t == factors_.size()) {
            if (singles_ != 0) return;
            double v = coef;
            for (int i : touched_) {
                const double m = moments_[i * (max_mult_ + 1) + mult_[i]];
                if (std::isnan(m))
                    throw ArgumentError("coordinate " + std::to_string(i) + " lacks moment of order " +
                                        std::to_string(mult_[i]));
                v *= m;
            }
            acc_ += v;
            return;
        }
        const auto* f = factors_[t];
        for (std::size_t e = 0; e < f->nnz(); ++e) {
            const auto tup = f->tuple(e);
            place(tup);
            if (singles_ <= remaining_[t + 1]) descend(t + 1, coef * f->value(e));
            unplace(tup);
        }
    }

    std::span<const SymmetricKernel* const> factors_;
    int n_;
    int max_mult_ = 0;
    std::vector<int> mult_;
    std::vector<int> touched_;
    std::vector<double> moments_;
    std::vector<int> remaining_;
    int singles_ = 0;
    double weight_ = 1.0;
    CompensatedSum acc_;
};

}  // namespace

double product_moment(std::span<const SymmetricKernel* const> factors, std::span<const VariableSpec> coordinates,
                      const MomentOptions& options) {
    if (factors.empty()) return 1.0;
    const int n = factors.front()->dim();
    int order = 0;
    double loops = 1.0;
    for (const auto* f : factors) {
        if (f->dim() != n) throw ArgumentError("kernel dim mismatch");
        order += f->degree();
        loops *= static_cast<double>(f->nnz());
    }
    if (static_cast<int>(coordinates.size()) != n) throw ArgumentError("kernel dim mismatch");
    if (order > options.max_order)
        throw ResourceError("product of total tensor order " + std::to_string(order) +
                            " exceeds the enumeration cap of " + std::to_string(options.max_order));
    if (loops > options.max_loops) {
        std::ostringstream msg;
        msg << "raw loop count " << loops << " exceeds the enumeration cap of " << options.max_loops;
        throw ResourceError(msg.str());
    }
    if (loops == 0.0) return 0.0;

    const std::size_t blocks = factors.front()->nnz();
    std::vector<double> partial(blocks, 0.0);
    parallel_for_blocks(blocks, options.threads, [&](std::size_t b) {
        ProductExpansion expansion(factors, coordinates);
        partial[b] = expansion.branch(b);
    });
    CompensatedSum s;
    for (double v : partial) s += v;
    return s.value();
}

double exact_product_moment(const HomSumSystem& system, std::span<const FactorPower> powers,
                            const MomentOptions& options) {
    std::vector<const SymmetricKernel*> factors;
    for (const auto& p : powers) {
        if (p.kernel < 0 || p.kernel >= system.size()) throw ArgumentError("kernel index out of range");
        if (p.count < 0) throw ArgumentError("negative exponent");
        for (int c = 0; c < p.count; ++c) factors.push_back(&system.kernel(p.kernel));
    }
    return product_moment(factors, system.coordinates(), options);
}

double kappa4_oracle(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                     const MomentOptions& options) {
    const SymmetricKernel* four[] = {&f, &f, &f, &f};
    const SymmetricKernel* two[] = {&f, &f};
    const double m2 = product_moment(two, coordinates, options);
    return product_moment(four, coordinates, options) - 3.0 * m2 * m2;
}

double kappa4(const SymmetricKernel& f, std::span<const VariableSpec> coordinates, const MomentOptions& options) {
    if (static_cast<int>(coordinates.size()) != f.dim()) throw ArgumentError("kernel dim mismatch");
    if (f.degree() == 1) {
        CompensatedSum s;
        for (std::size_t e = 0; e < f.nnz(); ++e) {
            const double v = f.value(e);
            s += v * v * v * v * coordinates[f.tuple(e)[0]].excess_kurtosis();
        }
        return s.value();
    }
    if (f.degree() == 2) {
        const double m2 = f.norm_squared() * 2.0;
        return dejong_q2_fourth_moment(f, coordinates).fourth_moment - 3.0 * m2 * m2;
    }
    return kappa4_oracle(f, coordinates, options);
}

double kappa4(const HomSumSystem& system, int j, const MomentOptions& options) {
    return kappa4(system.kernel(j), system.coordinates(), options);
}

bool DeJongTerms::classical_bound_holds() const {
    const double lhs = std::abs(fourth_moment - 6.0 * g5);
    const double rhs = g1 + 18.0 * g2 + 12.0 * std::abs(g3) + 24.0 * std::abs(g4);
    return lhs <= rhs + 1e-12 * std::max({1.0, lhs, rhs});
}

DeJongTerms dejong_q2_fourth_moment(const SymmetricKernel& f, std::span<const VariableSpec> coordinates) {
    if (f.degree() != 2) throw ArgumentError("G-term decomposition needs a degree-2 kernel");
    if (static_cast<int>(coordinates.size()) != f.dim()) throw ArgumentError("kernel dim mismatch");
    const int n = f.dim();
    const Eigen::MatrixXd a = f.matrix();
    const Eigen::MatrixXd sq = a.cwiseProduct(a);
    const Eigen::MatrixXd a2 = a * a;
    Eigen::VectorXd m3(n), m4(n);
    for (int i = 0; i < n; ++i) {
        m3[i] = coordinates[i].moment(3);
        m4[i] = coordinates[i].moment(4);
    }
    const Eigen::VectorXd row = sq.rowwise().sum();
    const Eigen::MatrixXd sq2 = sq.cwiseProduct(sq);
    const Eigen::VectorXd row_sq2 = sq2.rowwise().sum();

    // Ordered distinct triples (i, j, k): sum_{j != k} a_ij a_ik = r_i^2 - sum_j a_ij^2.
    const Eigen::VectorXd star = row.cwiseProduct(row) - row_sq2;
    const double total = sq.sum();
    const double quad = sq2.sum();

    DeJongTerms out;
    out.g1 = 8.0 * m4.dot(sq2 * m4);
    out.g2 = 8.0 * m4.dot(star);
    out.g3 = 8.0 * (sq.cwiseProduct(a2)).cwiseProduct(m3 * m3.transpose()).sum();
    // trace(A^4) = sum_D2 f^4 + 2 sum_D3 f_ij^2 f_ik^2 + sum_D4 (4-cycles)
    const double cycles = a2.squaredNorm() - quad - 2.0 * star.sum();
    out.g4 = 2.0 * cycles;
    // sum_D4 a_ij a_kl = S^2 - 4 T3 - 2 sum a^2
    out.g5 = 2.0 * (total * total - 4.0 * star.sum() - 2.0 * quad);
    out.fourth_moment = out.g1 + 6.0 * out.g2 + 12.0 * out.g3 + 24.0 * out.g4 + 6.0 * out.g5;
    return out;
}

double ContractionBound::fitted_constant() const {
    if (influence_term <= 0.0) return 0.0;
    return std::max(0.0, (max_contraction * max_contraction - abs_kappa4) / influence_term);
}

namespace {

double max_self_contraction(const SymmetricKernel& f) {
    double best = 0.0;
    for (int r = 1; r < f.degree(); ++r) best = std::max(best, std::sqrt(contract(f, f, r).values.norm_squared()));
    return best;
}

}  // namespace

ContractionBound contraction_bound_check(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                                         const MomentOptions& options) {
    ContractionBound out;
    out.max_contraction = max_self_contraction(f);
    out.abs_kappa4 = std::abs(kappa4(f, coordinates, options));
    double m4 = 0.0;
    for (const auto& c : coordinates) m4 = std::max(m4, c.moment(4));
    out.influence_term = (1.0 + m4) * f.norm_squared() * f.max_influence();
    return out;
}

bool TransferChain::holds(double rel_slack) const {
    const auto le = [rel_slack](double a, double b) {
        return a <= b + rel_slack * std::max({1e-300, std::abs(a), std::abs(b)});
    };
    return le(max_influence, max_contraction) && le(max_contraction, kappa_term);
}

TransferChain transfer_inequality_check(const SymmetricKernel& f, std::span<const VariableSpec> coordinates,
                                        TransferCondition condition, const MomentOptions& options) {
    if (f.degree() < 2) throw ArgumentError("transfer inequality needs degree >= 2");
    if (static_cast<int>(coordinates.size()) != f.dim()) throw ArgumentError("kernel dim mismatch");
    switch (condition) {
        case TransferCondition::A:
            for (const auto& c : coordinates)
                if (!(c == coordinates.front()))
                    throw ArgumentError("condition A needs identically distributed coordinates");
            if (coordinates.front().moment(3) != 0.0 || coordinates.front().moment(4) < 3.0)
                throw ArgumentError("condition A needs E[X^3] = 0 and E[X^4] >= 3");
            break;
        case TransferCondition::B:
            for (const auto& c : coordinates)
                if (c.law() != Law::PoissonStd) throw ArgumentError("condition B needs standardized Poisson coordinates");
            break;
        case TransferCondition::C:
            for (const auto& c : coordinates)
                if (c.law() != Law::GammaPlus) throw ArgumentError("condition C needs standardized gamma coordinates");
            break;
    }
    TransferChain out;
    out.max_influence = f.max_influence();
    out.max_contraction = max_self_contraction(f);
    const double k4 = kappa4(f, coordinates, options);
    out.kappa_term = std::sqrt(std::max(k4, 0.0)) / (f.degree() * factorial(f.degree()));
    return out;
}

}  // namespace homsum
