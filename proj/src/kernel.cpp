#include "homsum/kernel.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "homsum/combinatorics.hpp"
#include "homsum/errors.hpp"

namespace homsum {

namespace {

std::size_t checked_power(int base, int exp) {
    std::size_t out = 1;
    for (int k = 0; k < exp; ++k) {
        out *= static_cast<std::size_t>(base);
        if (out > kMaxTensorEntries)
            throw ResourceError("dense array of " + std::to_string(base) + "^" + std::to_string(exp) +
                                " entries exceeds the tensor cap of 2^25");
    }
    return out;
}

bool lex_less(std::span<const int> a, std::span<const int> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace

SymmetricKernel::SymmetricKernel(int degree, int dim) : degree_(degree), dim_(dim) {
    if (degree < 1) throw ArgumentError("kernel degree must be positive");
    if (dim < 1) throw ArgumentError("kernel dimension must be positive");
    touching_.resize(dim_);
}

SymmetricKernel::SymmetricKernel(int degree, int dim, std::vector<Entry> entries)
    : SymmetricKernel(degree, dim) {
    for (auto& e : entries) {
        if (static_cast<int>(e.indices.size()) != degree)
            throw ArgumentError("kernel entry has " + std::to_string(e.indices.size()) +
                                " indices, expected " + std::to_string(degree));
        std::sort(e.indices.begin(), e.indices.end());
        for (std::size_t k = 0; k < e.indices.size(); ++k) {
            if (e.indices[k] < 0 || e.indices[k] >= dim)
                throw ArgumentError("kernel index " + std::to_string(e.indices[k]) + " outside [0, " +
                                    std::to_string(dim) + ")");
            if (k > 0 && e.indices[k] == e.indices[k - 1])
                throw ArgumentError("kernel entry repeats index " + std::to_string(e.indices[k]));
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return lex_less(a.indices, b.indices); });
    for (std::size_t e = 0; e < entries.size(); ++e) {
        if (e > 0 && entries[e].indices == entries[e - 1].indices)
            throw ArgumentError("kernel tuple given twice");
        if (entries[e].value == 0.0) continue;
        indices_.insert(indices_.end(), entries[e].indices.begin(), entries[e].indices.end());
        values_.push_back(entries[e].value);
    }
    build_touching();
}

void SymmetricKernel::build_touching() {
    touching_.assign(dim_, {});
    for (std::size_t e = 0; e < nnz(); ++e)
        for (int i : tuple(e)) touching_[i].push_back(e);
}

std::ptrdiff_t SymmetricKernel::find(std::span<const int> sorted) const {
    std::size_t lo = 0, hi = nnz();
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (lex_less(tuple(mid), sorted))
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo < nnz() && std::equal(sorted.begin(), sorted.end(), tuple(lo).begin())) return lo;
    return -1;
}

double SymmetricKernel::operator()(std::span<const int> idx) const {
    if (static_cast<int>(idx.size()) != degree_) throw ArgumentError("lookup with wrong tuple length");
    std::vector<int> sorted(idx.begin(), idx.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (sorted[k] < 0 || sorted[k] >= dim_) throw ArgumentError("lookup index out of range");
        if (k > 0 && sorted[k] == sorted[k - 1]) return 0.0;
    }
    const auto pos = find(sorted);
    return pos < 0 ? 0.0 : values_[pos];
}

double SymmetricKernel::operator()(std::initializer_list<int> idx) const {
    return (*this)(std::span<const int>(idx.begin(), idx.size()));
}

double SymmetricKernel::norm_squared() const {
    CompensatedSum s;
    for (double v : values_) s += v * v;
    return factorial(degree_) * s.value();
}

double SymmetricKernel::norm() const { return std::sqrt(norm_squared()); }

double SymmetricKernel::influence(int i) const {
    if (i < 0 || i >= dim_) throw ArgumentError("influence index " + std::to_string(i) + " out of range");
    double s = 0.0;
    for (std::size_t e : touching_[i]) s += values_[e] * values_[e];
    return factorial(degree_ - 1) * s;
}

Eigen::VectorXd SymmetricKernel::influences() const {
    Eigen::VectorXd out(dim_);
    for (int i = 0; i < dim_; ++i) out[i] = influence(i);
    return out;
}

double SymmetricKernel::max_influence() const { return influences().maxCoeff(); }

double SymmetricKernel::evaluate(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) throw ArgumentError("kernel dim mismatch");
    double s = 0.0;
    for (std::size_t e = 0; e < nnz(); ++e) {
        double prod = values_[e];
        for (int i : tuple(e)) prod *= x[i];
        s += prod;
    }
    return factorial(degree_) * s;
}

Eigen::MatrixXd SymmetricKernel::matrix() const {
    if (degree_ != 2) throw ArgumentError("matrix form needs a degree-2 kernel");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim_, dim_);
    for (std::size_t e = 0; e < nnz(); ++e) {
        const auto t = tuple(e);
        a(t[0], t[1]) = values_[e];
        a(t[1], t[0]) = values_[e];
    }
    return a;
}

std::vector<double> SymmetricKernel::dense() const {
    const std::size_t total = checked_power(dim_, degree_);
    std::vector<double> out(total, 0.0);
    std::vector<int> perm(degree_);
    for (std::size_t e = 0; e < nnz(); ++e) {
        const auto t = tuple(e);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            std::size_t flat = 0;
            for (int k = 0; k < degree_; ++k) flat = flat * dim_ + t[perm[k]];
            out[flat] = values_[e];
        } while (std::next_permutation(perm.begin(), perm.end()));
    }
    return out;
}

SymmetricKernel SymmetricKernel::relabelled(std::span<const int> perm) const {
    if (static_cast<int>(perm.size()) != dim_) throw ArgumentError("relabelling has wrong length");
    std::vector<Entry> entries;
    entries.reserve(nnz());
    for (std::size_t e = 0; e < nnz(); ++e) {
        Entry en{{}, values_[e]};
        for (int i : tuple(e)) en.indices.push_back(perm[i]);
        entries.push_back(std::move(en));
    }
    return SymmetricKernel(degree_, dim_, std::move(entries));
}

SymmetricKernel SymmetricKernel::scaled(double c) const {
    SymmetricKernel out = *this;
    for (double& v : out.values_) v *= c;
    if (c == 0.0) {
        out.indices_.clear();
        out.values_.clear();
        out.build_touching();
    }
    return out;
}

std::uint64_t SymmetricKernel::content_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t word) {
        for (int b = 0; b < 8; ++b) {
            h ^= (word >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(static_cast<std::uint64_t>(degree_));
    mix(static_cast<std::uint64_t>(dim_));
    for (int i : indices_) mix(static_cast<std::uint64_t>(i));
    for (double v : values_) mix(std::bit_cast<std::uint64_t>(v));
    return h;
}

bool operator==(const SymmetricKernel& a, const SymmetricKernel& b) {
    return a.degree_ == b.degree_ && a.dim_ == b.dim_ && a.indices_ == b.indices_ && a.values_ == b.values_;
}

double inner(const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.dim() != g.dim()) throw ArgumentError("kernel dim mismatch");
    if (f.degree() != g.degree()) return 0.0;
    // Both entry lists are lexicographically sorted: merge.
    CompensatedSum s;
    std::size_t a = 0, b = 0;
    while (a < f.nnz() && b < g.nnz()) {
        const auto ta = f.tuple(a), tb = g.tuple(b);
        if (lex_less(ta, tb))
            ++a;
        else if (lex_less(tb, ta))
            ++b;
        else
            s += f.value(a++) * g.value(b++);
    }
    return factorial(f.degree()) * s.value();
}

Tensor::Tensor(int order, int dim) : order_(order), dim_(dim) {
    if (order < 0 || dim < 1) throw ArgumentError("bad tensor shape");
    data_.assign(checked_power(dim, order), 0.0);
}

std::size_t Tensor::flat_index(std::span<const int> idx) const {
    if (static_cast<int>(idx.size()) != order_) throw ArgumentError("tensor index has wrong length");
    std::size_t flat = 0;
    for (int i : idx) {
        if (i < 0 || i >= dim_) throw ArgumentError("tensor index out of range");
        flat = flat * dim_ + i;
    }
    return flat;
}

double Tensor::at(std::span<const int> idx) const { return data_[flat_index(idx)]; }

double Tensor::norm_squared() const {
    CompensatedSum s;
    for (double v : data_) s += v * v;
    return s.value();
}

double Tensor::offdiag_norm_squared() const {
    CompensatedSum s;
    std::vector<int> idx(order_, 0);
    for (std::size_t flat = 0; flat < data_.size(); ++flat) {
        bool repeated = false;
        for (int a = 0; a < order_ && !repeated; ++a)
            for (int b = a + 1; b < order_; ++b)
                if (idx[a] == idx[b]) {
                    repeated = true;
                    break;
                }
        if (repeated) s += data_[flat] * data_[flat];
        for (int k = order_ - 1; k >= 0; --k) {
            if (++idx[k] < dim_) break;
            idx[k] = 0;
        }
    }
    return s.value();
}

double inner(const Tensor& a, const Tensor& b) {
    if (a.order_ != b.order_ || a.dim_ != b.dim_) throw ArgumentError("tensor shape mismatch");
    CompensatedSum s;
    for (std::size_t k = 0; k < a.data_.size(); ++k) s += a.data_[k] * b.data_[k];
    return s.value();
}

ContractionResult contract(const SymmetricKernel& f, const SymmetricKernel& g, int r) {
    if (f.dim() != g.dim()) throw ArgumentError("kernel dim mismatch");
    const int p = f.degree(), q = g.degree(), n = f.dim();
    if (r < 0 || r > std::min(p, q)) throw ArgumentError("contraction order out of range");
    ContractionResult out{Tensor(p + q - 2 * r, n), p, q, r};

    // f as an N^{p-r} x N^r matrix, g as N^{q-r} x N^r; the contraction is F G^T.
    using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const std::vector<double> fd = f.dense(), gd = g.dense();
    const auto rows_f = static_cast<Eigen::Index>(checked_power(n, p - r));
    const auto rows_g = static_cast<Eigen::Index>(checked_power(n, q - r));
    const auto inner_dim = static_cast<Eigen::Index>(checked_power(n, r));
    Eigen::Map<const RowMatrix> fm(fd.data(), rows_f, inner_dim);
    Eigen::Map<const RowMatrix> gm(gd.data(), rows_g, inner_dim);
    Eigen::Map<RowMatrix> om(out.values.data().data(), rows_f, rows_g);
    om.noalias() = fm * gm.transpose();
    return out;
}

Tensor symmetrize(const Tensor& h) {
    const int n = h.order(), dim = h.dim();
    Tensor out(n, dim);
    if (n == 0) {
        out[0] = h[0];
        return out;
    }
    std::vector<std::size_t> stride(n);
    stride[n - 1] = 1;
    for (int k = n - 2; k >= 0; --k) stride[k] = stride[k + 1] * dim;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    const double weight = 1.0 / factorial(n);
    std::vector<std::size_t> src_stride(n);
    std::vector<int> idx(n);
    do {
        // out(i_0..i_{n-1}) += h(i_{perm[0]}, ..., i_{perm[n-1]})
        for (int t = 0; t < n; ++t) src_stride[perm[t]] = stride[t];
        std::fill(idx.begin(), idx.end(), 0);
        std::size_t src = 0;
        for (std::size_t flat = 0; flat < out.size(); ++flat) {
            out[flat] += weight * h[src];
            for (int k = n - 1; k >= 0; --k) {
                src += src_stride[k];
                if (++idx[k] < dim) break;
                src -= src_stride[k] * dim;
                idx[k] = 0;
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return out;
}

Tensor symmetric_product(const SymmetricKernel& f, const SymmetricKernel& g) {
    if (f.dim() != g.dim()) throw ArgumentError("kernel dim mismatch");
    const int p = f.degree(), q = g.degree(), n = p + q, dim = f.dim();
    if (n > 31) throw ResourceError("symmetric product order above 31");
    Tensor out(n, dim);
    const std::vector<double> fd = f.dense(), gd = g.dense();
    const auto shuffles = subsets_of_size(n, p);
    const double weight = 1.0 / static_cast<double>(shuffles.size());

    std::vector<std::size_t> fstride(n), gstride(n);
    std::vector<int> idx(n);
    for (std::uint32_t mask : shuffles) {
        // Axis t feeds f when bit t is set; positions keep their relative order.
        std::size_t fs = 1, gs = 1;
        for (int t = n - 1; t >= 0; --t) {
            if (mask >> t & 1u) {
                fstride[t] = fs;
                gstride[t] = 0;
                fs *= dim;
            } else {
                gstride[t] = gs;
                fstride[t] = 0;
                gs *= dim;
            }
        }
        std::fill(idx.begin(), idx.end(), 0);
        std::size_t fo = 0, go = 0;
        for (std::size_t flat = 0; flat < out.size(); ++flat) {
            out[flat] += weight * fd[fo] * gd[go];
            for (int k = n - 1; k >= 0; --k) {
                fo += fstride[k];
                go += gstride[k];
                if (++idx[k] < dim) break;
                fo -= fstride[k] * dim;
                go -= gstride[k] * dim;
                idx[k] = 0;
            }
        }
    }
    return out;
}

IdentityResidual nr_identity_check(const SymmetricKernel& f, const SymmetricKernel& g) {
    const int p = f.degree(), q = g.degree();
    IdentityResidual res;
    res.lhs = factorial(p + q) * symmetric_product(f, g).norm_squared();
    CompensatedSum rhs;
    for (int r = 0; r <= std::min(p, q); ++r)
        rhs += binomial(p, r) * binomial(q, r) * contract(f, g, r).values.norm_squared();
    res.rhs = factorial(p) * factorial(q) * rhs.value();
    const double scale = std::max({std::abs(res.lhs), std::abs(res.rhs), 1e-300});
    res.relative = std::abs(res.lhs - res.rhs) / scale;
    return res;
}

BoundCheck offdiag_tensor_bound_check(const SymmetricKernel& f) {
    BoundCheck out;
    out.lhs = symmetric_product(f, f).offdiag_norm_squared();
    const Eigen::VectorXd inf = f.influences();
    out.rhs = offdiag_constant(f.degree()) * inf.squaredNorm();
    return out;
}

double trace_fourth_power(const SymmetricKernel& f) {
    const Eigen::MatrixXd a = f.matrix();
    const Eigen::MatrixXd a2 = a * a;
    return a2.squaredNorm();
}

SymmetricKernel read_kernel(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ArgumentError("empty kernel file");
    std::istringstream head(line);
    std::string magic, version, qtok, ntok;
    head >> magic >> version >> qtok >> ntok;
    if (magic != "homsum-kernel" || version != "v1" || qtok.rfind("q=", 0) != 0 || ntok.rfind("N=", 0) != 0)
        throw ArgumentError("bad kernel header, expected 'homsum-kernel v1 q=<q> N=<N>'");
    int q = 0, n = 0;
    try {
        q = std::stoi(qtok.substr(2));
        n = std::stoi(ntok.substr(2));
    } catch (const std::exception&) {
        throw ArgumentError("bad kernel header numbers");
    }
    std::vector<SymmetricKernel::Entry> entries;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream row(line);
        SymmetricKernel::Entry e;
        e.indices.resize(q);
        for (int k = 0; k < q; ++k) {
            if (!(row >> e.indices[k])) throw ArgumentError("kernel line " + std::to_string(lineno) + ": bad index");
            if (k > 0 && e.indices[k] <= e.indices[k - 1] + 1)
                throw ArgumentError("kernel line " + std::to_string(lineno) + ": indices not strictly increasing");
            if (e.indices[k] < 1 || e.indices[k] > n)
                throw ArgumentError("kernel line " + std::to_string(lineno) + ": index outside [1, N]");
            --e.indices[k];
        }
        if (!(row >> e.value)) throw ArgumentError("kernel line " + std::to_string(lineno) + ": bad value");
        std::string rest;
        if (row >> rest) throw ArgumentError("kernel line " + std::to_string(lineno) + ": trailing tokens");
        entries.push_back(std::move(e));
    }
    return SymmetricKernel(q, n, std::move(entries));
}

void write_kernel(std::ostream& out, const SymmetricKernel& f) {
    out << "homsum-kernel v1 q=" << f.degree() << " N=" << f.dim() << '\n';
    out << std::setprecision(17);
    for (std::size_t e = 0; e < f.nnz(); ++e) {
        for (int i : f.tuple(e)) out << i + 1 << ' ';
        out << f.value(e) << '\n';
    }
}

SymmetricKernel load_kernel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open kernel file " + path);
    return read_kernel(in);
}

void save_kernel(const std::string& path, const SymmetricKernel& f) {
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot write kernel file " + path);
    write_kernel(out, f);
}

SymmetricKernel banded_kernel(int n) {
    if (n < 2) throw ArgumentError("banded kernel needs N >= 2");
    const double v = 1.0 / std::sqrt(2.0 * (n - 1));
    std::vector<SymmetricKernel::Entry> entries;
    for (int i = 0; i + 1 < n; ++i) entries.push_back({{i, i + 1}, v});
    return SymmetricKernel(2, n, std::move(entries));
}

SymmetricKernel scaled_band_kernel(int n) {
    if (n < 2) throw ArgumentError("band kernel needs N >= 2");
    const double v = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<SymmetricKernel::Entry> entries;
    for (int i = 0; i + 1 < n; ++i) entries.push_back({{i, i + 1}, v});
    return SymmetricKernel(2, n, std::move(entries));
}

SymmetricKernel bump_band_kernel(int n, int k) {
    if (n < 2) throw ArgumentError("band kernel needs N >= 2");
    if (k < 0 || k >= n) throw ArgumentError("bump position outside [0, N)");
    const double base = std::pow(static_cast<double>(n), -0.5);
    const double bump = std::pow(static_cast<double>(n), -0.25);
    std::vector<SymmetricKernel::Entry> entries;
    for (int i = 0; i + 1 < n; ++i) entries.push_back({{i, i + 1}, (i == k || i + 1 == k) ? bump : base});
    return SymmetricKernel(2, n, std::move(entries));
}

SymmetricKernel uniform_linear_kernel(int n) {
    const double v = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<SymmetricKernel::Entry> entries;
    for (int i = 0; i < n; ++i) entries.push_back({{i}, v});
    return SymmetricKernel(1, n, std::move(entries));
}

SymmetricKernel random_kernel(int q, int n, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(std::clamp(density, 0.0, 1.0));
    std::normal_distribution<double> value;
    std::vector<SymmetricKernel::Entry> entries;
    if (q <= n) {
        std::vector<int> idx(q);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            if (keep(rng)) entries.push_back({idx, value(rng)});
            int k = q - 1;
            while (k >= 0 && idx[k] == n - q + k) --k;
            if (k < 0) break;
            ++idx[k];
            for (int j = k + 1; j < q; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return SymmetricKernel(q, n, std::move(entries));
}

}  // namespace homsum
