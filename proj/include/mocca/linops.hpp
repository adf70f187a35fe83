#pragma once

#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mocca/errors.hpp"
#include "mocca/types.hpp"

namespace mocca {

/// Positive diagonal matrix, used for the step-size matrices and for the
/// diagonal metrics carried by the proximal operators.
class DiagonalScaling {
  public:
    explicit DiagonalScaling(Vector entries) : entries_(std::move(entries)) {
        for (Index i = 0; i < entries_.size(); ++i) {
            if (!(entries_[i] > 0.0))
                throw InvalidDimension("DiagonalScaling: entry " + std::to_string(i) +
                                       " is not strictly positive");
        }
    }

    static DiagonalScaling uniform(double value, Index n) {
        return DiagonalScaling(Vector::Constant(n, value));
    }

    Index size() const { return entries_.size(); }
    const Vector& entries() const { return entries_; }
    double operator[](Index i) const { return entries_[i]; }

    Vector apply(const Vector& v) const { return entries_.cwiseProduct(v); }
    Vector solve(const Vector& v) const { return v.cwiseQuotient(entries_); }

    DiagonalScaling inverse() const { return DiagonalScaling(entries_.cwiseInverse()); }

    double max_entry() const { return entries_.maxCoeff(); }
    double min_entry() const { return entries_.minCoeff(); }

  private:
    Vector entries_;
};

/// Contiguous row ranges partitioning [0, total). Blocks may be empty
/// (a grid pixel with no outgoing differences contributes an empty block).
class BlockStructure {
  public:
    struct Range {
        Index offset;
        Index length;
    };

    BlockStructure(std::vector<Range> ranges, Index total)
        : ranges_(std::move(ranges)), total_(total) {
        Index at = 0;
        for (std::size_t l = 0; l < ranges_.size(); ++l) {
            if (ranges_[l].offset != at || ranges_[l].length < 0)
                throw InvalidDimension("BlockStructure: block " + std::to_string(l) +
                                       " is not contiguous with its predecessor");
            at += ranges_[l].length;
        }
        if (at != total_)
            throw InvalidDimension("BlockStructure: blocks cover " + std::to_string(at) +
                                   " rows, expected " + std::to_string(total_));
    }

    static BlockStructure from_lengths(const std::vector<Index>& lengths) {
        std::vector<Range> r;
        r.reserve(lengths.size());
        Index at = 0;
        for (Index len : lengths) {
            r.push_back({at, len});
            at += len;
        }
        return BlockStructure(std::move(r), at);
    }

    /// One block per row.
    static BlockStructure singletons(Index total) {
        return from_lengths(std::vector<Index>(static_cast<std::size_t>(total), 1));
    }

    std::size_t block_count() const { return ranges_.size(); }
    const Range& block(std::size_t l) const { return ranges_[l]; }
    Index total() const { return total_; }

  private:
    std::vector<Range> ranges_;
    Index total_;
};

namespace detail {

struct LinOpImpl {
    virtual ~LinOpImpl() = default;
    virtual Index rows() const = 0;
    virtual Index cols() const = 0;
    virtual Vector apply(const Vector& x) const = 0;
    virtual Vector adjoint(const Vector& w) const = 0;
    virtual Vector row_abs_sums() const = 0;
    virtual Vector col_abs_sums() const = 0;
};

struct DenseOp final : LinOpImpl {
    Matrix a;
    explicit DenseOp(Matrix m) : a(std::move(m)) {}
    Index rows() const override { return a.rows(); }
    Index cols() const override { return a.cols(); }
    Vector apply(const Vector& x) const override { return a * x; }
    Vector adjoint(const Vector& w) const override { return a.transpose() * w; }
    Vector row_abs_sums() const override { return a.cwiseAbs().rowwise().sum(); }
    Vector col_abs_sums() const override { return a.cwiseAbs().colwise().sum().transpose(); }
};

struct IdentityOp final : LinOpImpl {
    Index d;
    explicit IdentityOp(Index dim) : d(dim) {}
    Index rows() const override { return d; }
    Index cols() const override { return d; }
    Vector apply(const Vector& x) const override { return x; }
    Vector adjoint(const Vector& w) const override { return w; }
    Vector row_abs_sums() const override { return Vector::Ones(d); }
    Vector col_abs_sums() const override { return Vector::Ones(d); }
};

struct ZeroOp final : LinOpImpl {
    Index m, d;
    ZeroOp(Index rows_, Index cols_) : m(rows_), d(cols_) {}
    Index rows() const override { return m; }
    Index cols() const override { return d; }
    Vector apply(const Vector&) const override { return Vector::Zero(m); }
    Vector adjoint(const Vector&) const override { return Vector::Zero(d); }
    Vector row_abs_sums() const override { return Vector::Zero(m); }
    Vector col_abs_sums() const override { return Vector::Zero(d); }
};

/// First differences on a 1d grid: (Kx)_i = x_i - x_{i+1}, i = 0..p-2.
struct Diff1dOp final : LinOpImpl {
    Index p;
    explicit Diff1dOp(Index points) : p(points) {}
    Index rows() const override { return p - 1; }
    Index cols() const override { return p; }
    Vector apply(const Vector& x) const override {
        return x.head(p - 1) - x.tail(p - 1);
    }
    Vector adjoint(const Vector& w) const override {
        Vector y = Vector::Zero(p);
        y.head(p - 1) += w;
        y.tail(p - 1) -= w;
        return y;
    }
    Vector row_abs_sums() const override { return Vector::Constant(p - 1, 2.0); }
    Vector col_abs_sums() const override {
        Vector s = Vector::Constant(p, 2.0);
        s[0] = 1.0;
        s[p - 1] = 1.0;
        return s;
    }
};

/// First differences on a d1 x d2 grid, input in column-major pixel order
/// (pixel (i,j) at index i + j*d1). Emits all horizontal differences
/// x_{i,j} - x_{i,j+1}, then all vertical differences x_{i,j} - x_{i+1,j},
/// each enumerated column-major.
struct Diff2dOp final : LinOpImpl {
    Index d1, d2;
    Diff2dOp(Index rows_, Index cols_) : d1(rows_), d2(cols_) {}
    Index rows() const override { return d1 * (d2 - 1) + d2 * (d1 - 1); }
    Index cols() const override { return d1 * d2; }
    Vector apply(const Vector& x) const override {
        Vector y(rows());
        Index r = 0;
        for (Index j = 0; j + 1 < d2; ++j)
            for (Index i = 0; i < d1; ++i, ++r)
                y[r] = x[i + j * d1] - x[i + (j + 1) * d1];
        for (Index j = 0; j < d2; ++j)
            for (Index i = 0; i + 1 < d1; ++i, ++r)
                y[r] = x[i + j * d1] - x[i + 1 + j * d1];
        return y;
    }
    Vector adjoint(const Vector& w) const override {
        Vector y = Vector::Zero(cols());
        Index r = 0;
        for (Index j = 0; j + 1 < d2; ++j)
            for (Index i = 0; i < d1; ++i, ++r) {
                y[i + j * d1] += w[r];
                y[i + (j + 1) * d1] -= w[r];
            }
        for (Index j = 0; j < d2; ++j)
            for (Index i = 0; i + 1 < d1; ++i, ++r) {
                y[i + j * d1] += w[r];
                y[i + 1 + j * d1] -= w[r];
            }
        return y;
    }
    Vector row_abs_sums() const override { return Vector::Constant(rows(), 2.0); }
    Vector col_abs_sums() const override {
        Vector s = Vector::Zero(cols());
        for (Index j = 0; j < d2; ++j)
            for (Index i = 0; i < d1; ++i) {
                double c = 0.0;
                if (j + 1 < d2) c += 1.0; // left end of a horizontal pair
                if (j > 0) c += 1.0;      // right end
                if (i + 1 < d1) c += 1.0; // top end of a vertical pair
                if (i > 0) c += 1.0;      // bottom end
                s[i + j * d1] = c;
            }
        return s;
    }
};

struct ApplyCounter {
    std::atomic<long long> applies{0};
    std::atomic<long long> adjoints{0};
};

struct CountedOp final : LinOpImpl {
    std::shared_ptr<const LinOpImpl> inner;
    std::shared_ptr<ApplyCounter> counter;
    CountedOp(std::shared_ptr<const LinOpImpl> op, std::shared_ptr<ApplyCounter> c)
        : inner(std::move(op)), counter(std::move(c)) {}
    Index rows() const override { return inner->rows(); }
    Index cols() const override { return inner->cols(); }
    Vector apply(const Vector& x) const override {
        counter->applies.fetch_add(1, std::memory_order_relaxed);
        return inner->apply(x);
    }
    Vector adjoint(const Vector& w) const override {
        counter->adjoints.fetch_add(1, std::memory_order_relaxed);
        return inner->adjoint(w);
    }
    Vector row_abs_sums() const override { return inner->row_abs_sums(); }
    Vector col_abs_sums() const override { return inner->col_abs_sums(); }
};

struct StackOp final : LinOpImpl {
    std::vector<std::shared_ptr<const LinOpImpl>> parts;
    Index m, d;
    StackOp(std::vector<std::shared_ptr<const LinOpImpl>> ps, Index rows_, Index cols_)
        : parts(std::move(ps)), m(rows_), d(cols_) {}
    Index rows() const override { return m; }
    Index cols() const override { return d; }
    Vector apply(const Vector& x) const override {
        Vector y(m);
        Index at = 0;
        for (const auto& p : parts) {
            y.segment(at, p->rows()) = p->apply(x);
            at += p->rows();
        }
        return y;
    }
    Vector adjoint(const Vector& w) const override {
        Vector y = Vector::Zero(d);
        Index at = 0;
        for (const auto& p : parts) {
            y += p->adjoint(w.segment(at, p->rows()));
            at += p->rows();
        }
        return y;
    }
    Vector row_abs_sums() const override {
        Vector s(m);
        Index at = 0;
        for (const auto& p : parts) {
            s.segment(at, p->rows()) = p->row_abs_sums();
            at += p->rows();
        }
        return s;
    }
    Vector col_abs_sums() const override {
        Vector s = Vector::Zero(d);
        for (const auto& p : parts) s += p->col_abs_sums();
        return s;
    }
};

} // namespace detail

/// The fixed linear map K of a composite objective. Immutable after
/// construction; structured kinds (differences, stacks) are applied
/// matrix-free, dense storage only for explicit matrices.
class LinearOperator {
  public:
    Index rows() const { return impl_->rows(); }
    Index cols() const { return impl_->cols(); }

    Vector apply(const Vector& x) const {
        if (x.size() != cols())
            throw InvalidDimension("apply: vector has length " + std::to_string(x.size()) +
                                   ", operator has " + std::to_string(cols()) + " columns");
        return impl_->apply(x);
    }

    Vector adjoint_apply(const Vector& w) const {
        if (w.size() != rows())
            throw InvalidDimension("adjoint_apply: vector has length " + std::to_string(w.size()) +
                                   ", operator has " + std::to_string(rows()) + " rows");
        return impl_->adjoint(w);
    }

    Vector row_abs_sums() const { return impl_->row_abs_sums(); }
    Vector col_abs_sums() const { return impl_->col_abs_sums(); }

    static LinearOperator dense(Matrix a) {
        return LinearOperator(std::make_shared<detail::DenseOp>(std::move(a)));
    }
    static LinearOperator identity(Index d) {
        return LinearOperator(std::make_shared<detail::IdentityOp>(d));
    }
    static LinearOperator zero(Index m, Index d) {
        return LinearOperator(std::make_shared<detail::ZeroOp>(m, d));
    }

  private:
    explicit LinearOperator(std::shared_ptr<const detail::LinOpImpl> impl)
        : impl_(std::move(impl)) {}

    std::shared_ptr<const detail::LinOpImpl> impl_;

    friend LinearOperator make_diff_1d(Index);
    friend LinearOperator make_diff_2d(Index, Index);
    friend LinearOperator counted(const LinearOperator&, std::shared_ptr<detail::ApplyCounter>);
    friend std::pair<LinearOperator, BlockStructure>
    stack_operators(const std::vector<LinearOperator>&);
};

using ApplyCounter = detail::ApplyCounter;

/// Wrap an operator so every apply/adjoint increments the shared counter.
inline LinearOperator counted(const LinearOperator& inner,
                              std::shared_ptr<detail::ApplyCounter> counter) {
    return LinearOperator(std::make_shared<detail::CountedOp>(inner.impl_, std::move(counter)));
}

inline LinearOperator make_diff_1d(Index p) {
    if (p < 2) throw InvalidDimension("make_diff_1d: need p >= 2, got " + std::to_string(p));
    return LinearOperator(std::make_shared<detail::Diff1dOp>(p));
}

inline LinearOperator make_diff_2d(Index d1, Index d2) {
    if (d1 < 2 || d2 < 2)
        throw InvalidDimension("make_diff_2d: need d1, d2 >= 2, got " + std::to_string(d1) +
                               " x " + std::to_string(d2));
    return LinearOperator(std::make_shared<detail::Diff2dOp>(d1, d2));
}

inline std::pair<LinearOperator, BlockStructure>
stack_operators(const std::vector<LinearOperator>& ops) {
    if (ops.empty()) throw InvalidDimension("stack_operators: empty list");
    const Index d = ops.front().cols();
    std::vector<std::shared_ptr<const detail::LinOpImpl>> parts;
    std::vector<Index> lengths;
    Index m = 0;
    for (std::size_t l = 0; l < ops.size(); ++l) {
        if (ops[l].cols() != d)
            throw InvalidDimension("stack_operators: operator " + std::to_string(l) + " has " +
                                   std::to_string(ops[l].cols()) + " columns, expected " +
                                   std::to_string(d));
        parts.push_back(ops[l].impl_);
        lengths.push_back(ops[l].rows());
        m += ops[l].rows();
    }
    return {LinearOperator(std::make_shared<detail::StackOp>(std::move(parts), m, d)),
            BlockStructure::from_lengths(lengths)};
}

/// Step-size matrices of the diagonally preconditioned primal-dual scheme:
/// Sigma_ii = lambda / (abs sum of row i), T_jj = lambda^{-1} / (abs sum of
/// column j). Guarantees ||Sigma^{1/2} K T^{1/2}|| <= 1.
inline std::pair<DiagonalScaling, DiagonalScaling>
make_preconditioners(const LinearOperator& k, double lambda) {
    if (!(lambda > 0.0)) throw InvalidDimension("make_preconditioners: lambda must be positive");
    Vector rs = k.row_abs_sums();
    Vector cs = k.col_abs_sums();
    for (Index i = 0; i < rs.size(); ++i)
        if (rs[i] == 0.0)
            throw DegenerateOperator("make_preconditioners: row " + std::to_string(i) +
                                     " has zero absolute sum");
    for (Index j = 0; j < cs.size(); ++j)
        if (cs[j] == 0.0)
            throw DegenerateOperator("make_preconditioners: column " + std::to_string(j) +
                                     " has zero absolute sum");
    return {DiagonalScaling(lambda * rs.cwiseInverse()),
            DiagonalScaling((1.0 / lambda) * cs.cwiseInverse())};
}

struct OpNormEstimate {
    double value = 0.0;
    bool converged = false;
};

/// Power-iteration estimate of ||Sigma^{1/2} K T^{1/2}|| (largest singular
/// value). Deterministic all-ones start vector.
inline OpNormEstimate op_norm_estimate(const DiagonalScaling& sigma, const LinearOperator& k,
                                       const DiagonalScaling& t, int iters = 1000,
                                       double tol = 1e-10) {
    const Vector sig_half = sigma.entries().cwiseSqrt();
    const Vector t_half = t.entries().cwiseSqrt();
    Vector y = Vector::Ones(k.cols());
    y /= y.norm();
    double est = 0.0;
    bool converged = false;
    for (int it = 0; it < iters; ++it) {
        // z = (Sigma^{1/2} K T^{1/2})^T (Sigma^{1/2} K T^{1/2}) y
        Vector by = sig_half.cwiseProduct(k.apply(t_half.cwiseProduct(y)));
        Vector z = t_half.cwiseProduct(k.adjoint_apply(sig_half.cwiseProduct(by)));
        const double zn = z.norm();
        if (zn == 0.0) return {0.0, true};
        const double est_new = std::sqrt(y.dot(z) > 0.0 ? y.dot(z) : 0.0);
        y = z / zn;
        if (it > 0 && std::abs(est_new - est) <= tol * std::max(est_new, 1e-300)) {
            est = est_new;
            converged = true;
            break;
        }
        est = est_new;
    }
    return {est, converged};
}

/// Materialize the operator column by column. Test and small-problem helper.
inline Matrix to_dense(const LinearOperator& k) {
    Matrix a(k.rows(), k.cols());
    Vector e = Vector::Zero(k.cols());
    for (Index j = 0; j < k.cols(); ++j) {
        e[j] = 1.0;
        a.col(j) = k.apply(e);
        e[j] = 0.0;
    }
    return a;
}

} // namespace mocca
