#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace homsum {

// Symmetric f : [N]^q -> R vanishing on diagonals, stored as one value per
// strictly increasing index tuple. Indices are 0-based in the API and 1-based
// in the text format.
class SymmetricKernel {
public:
    struct Entry {
        std::vector<int> indices;
        double value;
    };

    SymmetricKernel(int degree, int dim);
    // Indices may come in any order; they are sorted. A repeated index inside a
    // tuple, an index outside [0, dim) or the same tuple given twice throws
    // ArgumentError. Zero values are dropped.
    SymmetricKernel(int degree, int dim, std::vector<Entry> entries);

    int degree() const { return degree_; }
    int dim() const { return dim_; }
    std::size_t nnz() const { return values_.size(); }

    std::span<const int> tuple(std::size_t e) const {
        return {indices_.data() + e * degree_, static_cast<std::size_t>(degree_)};
    }
    double value(std::size_t e) const { return values_[e]; }
    std::span<const double> values() const { return values_; }
    // Entries whose tuple contains i.
    std::span<const std::size_t> entries_touching(int i) const { return touching_[i]; }

    // f at an arbitrary (not necessarily sorted) tuple; 0 on diagonals.
    double operator()(std::span<const int> idx) const;
    double operator()(std::initializer_list<int> idx) const;

    // Over the full [N]^q grid: q! * sum of squared stored values.
    double norm_squared() const;
    double norm() const;

    double influence(int i) const;
    Eigen::VectorXd influences() const;
    double max_influence() const;

    // Q(f; x) including the q! permutation weight of every stored tuple.
    double evaluate(std::span<const double> x) const;

    // [f] as an N x N matrix (q = 2 only).
    Eigen::MatrixXd matrix() const;
    // Row-major dense values over [N]^q.
    std::vector<double> dense() const;

    // Same kernel with coordinates relabelled i -> perm[i].
    SymmetricKernel relabelled(std::span<const int> perm) const;
    SymmetricKernel scaled(double c) const;

    // Hash of degree, dim and entries, stable across runs.
    std::uint64_t content_hash() const;

    friend bool operator==(const SymmetricKernel& a, const SymmetricKernel& b);

private:
    void build_touching();
    std::ptrdiff_t find(std::span<const int> sorted) const;

    int degree_;
    int dim_;
    std::vector<int> indices_;
    std::vector<double> values_;
    std::vector<std::vector<std::size_t>> touching_;
};

// Full-grid inner product <f, g> (0 for different degrees).
double inner(const SymmetricKernel& f, const SymmetricKernel& g);

// Dense array over [N]^order, row-major with the last index fastest.
class Tensor {
public:
    Tensor() = default;
    Tensor(int order, int dim);

    int order() const { return order_; }
    int dim() const { return dim_; }
    std::size_t size() const { return data_.size(); }
    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }
    double at(std::span<const int> idx) const;
    std::size_t flat_index(std::span<const int> idx) const;

    double norm_squared() const;
    // Sum of squares over tuples with at least one repeated index.
    double offdiag_norm_squared() const;
    friend double inner(const Tensor& a, const Tensor& b);

private:
    int order_ = 0;
    int dim_ = 0;
    std::vector<double> data_;
};

// Largest dense array the contraction routines will allocate.
inline constexpr std::size_t kMaxTensorEntries = std::size_t{1} << 25;

struct ContractionResult {
    Tensor values;
    int left_degree = 0;
    int right_degree = 0;
    int r = 0;
};

// (f *_r g)(i_1..i_{p+q-2r}) = sum_k f(i_1..i_{p-r}, k) g(i_{p-r+1}.., k).
ContractionResult contract(const SymmetricKernel& f, const SymmetricKernel& g, int r);

// Average over all permutations of the arguments.
Tensor symmetrize(const Tensor& h);

// Symmetrized tensor product f (x)~ g, built from the C(p+q, p) shuffles rather
// than all (p+q)! permutations.
Tensor symmetric_product(const SymmetricKernel& f, const SymmetricKernel& g);

struct IdentityResidual {
    double lhs = 0.0;
    double rhs = 0.0;
    // |lhs - rhs| / max(|lhs|, |rhs|, tiny)
    double relative = 0.0;
};

// (p+q)! ||f (x)~ g||^2 against p! q! sum_r C(p,r) C(q,r) ||f *_r g||^2.
IdentityResidual nr_identity_check(const SymmetricKernel& f, const SymmetricKernel& g);

struct BoundCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds(double rel_slack = 1e-12) const {
        return lhs <= rhs + rel_slack * std::max({1.0, std::abs(lhs), std::abs(rhs)});
    }
};

// ||f (x)~ f 1_{off-diagonal}||^2 against offdiag_constant(q) sum_i Inf_i(f)^2.
BoundCheck offdiag_tensor_bound_check(const SymmetricKernel& f);

// trace([f]^4) for q = 2.
double trace_fourth_power(const SymmetricKernel& f);

SymmetricKernel read_kernel(std::istream& in);
void write_kernel(std::ostream& out, const SymmetricKernel& f);
SymmetricKernel load_kernel(const std::string& path);
void save_kernel(const std::string& path, const SymmetricKernel& f);

// f(i, i+1) = 1 / sqrt(2 (N-1)), so that ||f|| = 1.
SymmetricKernel banded_kernel(int n);
// f(i, i+1) = n^{-1/2}.
SymmetricKernel scaled_band_kernel(int n);
// Band with value n^{-1/2}, raised to n^{-1/4} on the two edges touching k.
SymmetricKernel bump_band_kernel(int n, int k);
// q = 1, f(i) = 1/sqrt(N).
SymmetricKernel uniform_linear_kernel(int n);
// Each q-subset kept with probability density, standard normal values.
SymmetricKernel random_kernel(int q, int n, double density, std::mt19937_64& rng);

}  // namespace homsum
