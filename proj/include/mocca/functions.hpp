#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <utility>

#include "mocca/errors.hpp"
#include "mocca/linops.hpp"
#include "mocca/prox.hpp"
#include "mocca/types.hpp"

namespace mocca {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A differentiable (possibly nonconvex) term, given by value and gradient.
struct SmoothTerm {
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    Index dim = 0;
};

/// Convex function accessed through its metric proximal map
/// prox(u, D) = argmin_x { f(x) + 1/2 ||x - u||^2_D } for diagonal D.
/// The metric passed is the one whose norm appears in the argmin (the
/// x-update passes T^{-1}). Values may be +inf to encode constraints.
class MetricProxFn {
  public:
    virtual ~MetricProxFn() = default;

    virtual double value(const Vector& x) const = 0;
    virtual Vector prox(const Vector& u, const DiagonalScaling& metric) const = 0;

    /// Element of the subdifferential at x closest to `target` (used by the
    /// optimality gap). Not every function registers one.
    virtual Vector subgrad(const Vector& x, const Vector& target) const {
        (void)x;
        (void)target;
        throw UnsupportedFunction("subgradient selector not registered for this function");
    }
};

/// Convex function accessed through the proximal map of its conjugate,
/// conj_prox(u, S) = argmin_w { f*(w) + 1/2 ||w - u||^2_S }; the w-update
/// passes S = Sigma^{-1}. A primal metric prox is derived from conj_prox via
/// the diagonal-metric Moreau decomposition unless a closed form overrides it.
class ConjMetricProxFn {
  public:
    virtual ~ConjMetricProxFn() = default;

    virtual double value(const Vector& w) const = 0;
    virtual Vector conj_prox(const Vector& u, const DiagonalScaling& metric_inv) const = 0;

    /// argmin_w { f(w) + 1/2 ||w - q||^2_metric }. Moreau route:
    /// prox_f^D(q) = q - D^{-1} prox_{f*}^{D^{-1}}(D q).
    virtual Vector prox(const Vector& q, const DiagonalScaling& metric) const {
        const DiagonalScaling inv = metric.inverse();
        return q - inv.apply(conj_prox(metric.apply(q), inv));
    }

    /// Element of the conjugate's subdifferential at w closest to `target`.
    virtual Vector conj_subgrad(const Vector& w, const Vector& target) const {
        (void)w;
        (void)target;
        throw UnsupportedFunction("conjugate subgradient selector not registered");
    }

    /// Max coordinatewise violation of the inclusion v in d f*(w).
    virtual double mirror_residual(const Vector& w, const Vector& v) const {
        (void)w;
        (void)v;
        throw UnsupportedFunction("mirror residual not registered for this function");
    }
};

using MetricProxPtr = std::shared_ptr<const MetricProxFn>;
using ConjProxPtr = std::shared_ptr<const ConjMetricProxFn>;

/// Minimizer of f*(w) + 1/2 ||w - u||^2_{Sigma^{-1}} obtained from the primal
/// prox of f: equals u - Sigma x' where x' minimizes f(x) - <u,x> + 1/2 ||x||^2_Sigma.
inline Vector moreau_conj_prox(const Vector& u, const DiagonalScaling& sigma_inv,
                               const MetricProxFn& f) {
    const DiagonalScaling sigma = sigma_inv.inverse();
    return u - sigma.apply(f.prox(sigma_inv.apply(u), sigma));
}

// ---------------------------------------------------------------------------
// Primal-side function objects (x update)
// ---------------------------------------------------------------------------

class ZeroFn final : public MetricProxFn {
  public:
    double value(const Vector&) const override { return 0.0; }
    Vector prox(const Vector& u, const DiagonalScaling&) const override { return u; }
    Vector subgrad(const Vector& x, const Vector&) const override { return Vector::Zero(x.size()); }
};

class LinearFn final : public MetricProxFn {
  public:
    LinearFn(Vector c, double c0 = 0.0) : c_(std::move(c)), c0_(c0) {}
    double value(const Vector& x) const override { return c_.dot(x) + c0_; }
    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        return u - d.solve(c_);
    }
    Vector subgrad(const Vector&, const Vector&) const override { return c_; }

  private:
    Vector c_;
    double c0_;
};

class WeightedL1Fn final : public MetricProxFn {
  public:
    explicit WeightedL1Fn(double nu) : nu_(nu) {}
    double value(const Vector& x) const override { return nu_ * x.lpNorm<1>(); }
    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        return prox_weighted_l1(u, d, nu_);
    }
    Vector subgrad(const Vector& x, const Vector& target) const override {
        Vector s(x.size());
        for (Index i = 0; i < x.size(); ++i)
            s[i] = x[i] != 0.0 ? nu_ * (x[i] > 0.0 ? 1.0 : -1.0)
                               : std::clamp(target[i], -nu_, nu_);
        return s;
    }

  private:
    double nu_;
};

class BoxIndicatorFn final : public MetricProxFn {
  public:
    BoxIndicatorFn(double lo, double hi) : lo_(lo), hi_(hi) {}
    double value(const Vector& x) const override {
        for (Index i = 0; i < x.size(); ++i)
            if (x[i] < lo_ || x[i] > hi_) return kInf;
        return 0.0;
    }
    Vector prox(const Vector& u, const DiagonalScaling&) const override {
        return u.cwiseMax(lo_).cwiseMin(hi_);
    }
    Vector subgrad(const Vector& x, const Vector& target) const override {
        Vector s(x.size());
        for (Index i = 0; i < x.size(); ++i) {
            if (x[i] >= hi_)
                s[i] = std::max(target[i], 0.0);
            else if (x[i] <= lo_)
                s[i] = std::min(target[i], 0.0);
            else
                s[i] = 0.0;
        }
        return s;
    }

  private:
    double lo_, hi_;
};

/// 1/2 ||x - data||^2; the prox is an entrywise average under any diagonal metric.
class DenoisingQuadFn final : public MetricProxFn {
  public:
    explicit DenoisingQuadFn(Vector data) : data_(std::move(data)) {}
    double value(const Vector& x) const override { return 0.5 * (x - data_).squaredNorm(); }
    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        Vector x(u.size());
        for (Index i = 0; i < u.size(); ++i) x[i] = (d[i] * u[i] + data_[i]) / (d[i] + 1.0);
        return x;
    }
    Vector subgrad(const Vector& x, const Vector&) const override { return x - data_; }

  private:
    Vector data_;
};

/// Refactored dense solve shared by every prox call made with the same
/// diagonal metric; expansions of a quadratic family share one cache.
struct QuadSolveCache {
    std::mutex mu;
    Vector metric;
    Eigen::LDLT<Matrix> ldlt;
    bool ready = false;
};

/// 1/2 x^T H x - b^T x + c0, optionally restricted to the l1 ball of radius R.
/// The metric prox solves (H + D) x = b + D u through a cached factorization;
/// when the ball constraint is active the solve falls back to projected
/// gradient iterations (tolerance 1e-12 on the step, capped).
class QuadraticFn final : public MetricProxFn {
  public:
    QuadraticFn(std::shared_ptr<const Matrix> h, Vector b, double c0 = 0.0,
                std::shared_ptr<QuadSolveCache> cache = nullptr, double radius = kInf)
        : h_(std::move(h)), b_(std::move(b)), c0_(c0),
          cache_(cache ? std::move(cache) : std::make_shared<QuadSolveCache>()),
          radius_(radius) {}

    static std::shared_ptr<QuadraticFn> least_squares(const Matrix& a, const Vector& y) {
        auto h = std::make_shared<Matrix>(a.transpose() * a);
        return std::make_shared<QuadraticFn>(std::move(h), a.transpose() * y,
                                             0.5 * y.squaredNorm());
    }

    double value(const Vector& x) const override {
        if (x.lpNorm<1>() > radius_) return kInf;
        return 0.5 * x.dot(*h_ * x) - b_.dot(x) + c0_;
    }

    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        Vector x = solve(b_ + d.apply(u), d);
        if (!x.allFinite()) throw NumericError("quadratic prox produced non-finite values");
        if (radius_ < kInf && x.lpNorm<1>() > radius_) x = constrained_prox(u, d);
        return x;
    }

    Vector subgrad(const Vector& x, const Vector&) const override { return *h_ * x - b_; }

    const Matrix& hessian() const { return *h_; }

  private:
    Vector solve(const Vector& rhs, const DiagonalScaling& d) const {
        std::lock_guard<std::mutex> lock(cache_->mu);
        if (!cache_->ready || cache_->metric.size() != d.size() ||
            cache_->metric != d.entries()) {
            Matrix m = *h_;
            m.diagonal() += d.entries();
            cache_->ldlt.compute(m);
            cache_->metric = d.entries();
            cache_->ready = true;
        }
        return cache_->ldlt.solve(rhs);
    }

    Vector constrained_prox(const Vector& u, const DiagonalScaling& d) const {
        // minimize 1/2 x^T (H + D) x - (b + D u)^T x over the l1 ball
        const Vector rhs = b_ + d.apply(u);
        Matrix m = *h_;
        m.diagonal() += d.entries();
        const double step = 1.0 / m.cwiseAbs().rowwise().sum().maxCoeff();
        const DiagonalScaling eye = DiagonalScaling::uniform(1.0, u.size());
        Vector x = project_weighted_l1_ball(u, eye, radius_);
        for (int it = 0; it < 20000; ++it) {
            Vector x_new = project_weighted_l1_ball(x - step * (m * x - rhs), eye, radius_);
            const double delta = (x_new - x).lpNorm<Eigen::Infinity>();
            x = std::move(x_new);
            if (delta <= 1e-12 * (1.0 + x.lpNorm<Eigen::Infinity>())) break;
        }
        return x;
    }

    std::shared_ptr<const Matrix> h_;
    Vector b_;
    double c0_;
    std::shared_ptr<QuadSolveCache> cache_;
    double radius_;
};

/// inner(x) + <c, x> + c0; the tilt shifts the prox argument.
class LinearTiltFn final : public MetricProxFn {
  public:
    LinearTiltFn(MetricProxPtr inner, Vector c, double c0 = 0.0)
        : inner_(std::move(inner)), c_(std::move(c)), c0_(c0) {}
    double value(const Vector& x) const override { return inner_->value(x) + c_.dot(x) + c0_; }
    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        return inner_->prox(u - d.solve(c_), d);
    }
    Vector subgrad(const Vector& x, const Vector& target) const override {
        return inner_->subgrad(x, target - c_) + c_;
    }

  private:
    MetricProxPtr inner_;
    Vector c_;
    double c0_;
};

/// <c, x> + c0 on the l1 ball of radius R, +inf outside.
class ConstrainedLinearFn final : public MetricProxFn {
  public:
    ConstrainedLinearFn(Vector c, double radius, double c0 = 0.0)
        : c_(std::move(c)), radius_(radius), c0_(c0) {}
    double value(const Vector& x) const override {
        return x.lpNorm<1>() > radius_ ? kInf : c_.dot(x) + c0_;
    }
    Vector prox(const Vector& u, const DiagonalScaling& d) const override {
        return project_weighted_l1_ball(u - d.solve(c_), d, radius_);
    }

  private:
    Vector c_;
    double radius_;
    double c0_;
};

// ---------------------------------------------------------------------------
// Dual-side function objects (w update)
// ---------------------------------------------------------------------------

/// The identically-zero function; its conjugate is the indicator of {0}.
class ZeroConjFn final : public ConjMetricProxFn {
  public:
    double value(const Vector&) const override { return 0.0; }
    Vector conj_prox(const Vector& u, const DiagonalScaling&) const override {
        return Vector::Zero(u.size());
    }
    Vector prox(const Vector& q, const DiagonalScaling&) const override { return q; }
    Vector conj_subgrad(const Vector&, const Vector& target) const override { return target; }
    double mirror_residual(const Vector& w, const Vector&) const override {
        return w.lpNorm<Eigen::Infinity>() == 0.0 ? 0.0 : kInf;
    }
};

/// Tilted l1 function nu*||w||_1 + <w, c> + offset. Its conjugate is the
/// indicator of the box [c - nu, c + nu], so the conjugate prox is the
/// clipped truncation and is independent of the diagonal metric.
class BoxConjFn final : public ConjMetricProxFn {
  public:
    BoxConjFn(double nu, Index m) : nu_(nu), c_(Vector::Zero(m)), offset_(0.0) {}
    BoxConjFn(double nu, Vector c, double offset = 0.0)
        : nu_(nu), c_(std::move(c)), offset_(offset) {}

    double value(const Vector& w) const override {
        return nu_ * w.lpNorm<1>() + c_.dot(w) + offset_;
    }
    Vector conj_prox(const Vector& u, const DiagonalScaling&) const override {
        return truncate_tilted(u, nu_, c_);
    }
    Vector conj_subgrad(const Vector& w, const Vector& target) const override {
        Vector s(w.size());
        for (Index i = 0; i < w.size(); ++i) {
            const double tol = boundary_tol(i);
            if (w[i] >= c_[i] + nu_ - tol)
                s[i] = std::max(target[i], 0.0);
            else if (w[i] <= c_[i] - nu_ + tol)
                s[i] = std::min(target[i], 0.0);
            else
                s[i] = 0.0;
        }
        return s;
    }
    double mirror_residual(const Vector& w, const Vector& v) const override {
        double r = 0.0;
        for (Index i = 0; i < w.size(); ++i) {
            const double tol = boundary_tol(i);
            const double hi = c_[i] + nu_;
            const double lo = c_[i] - nu_;
            if (w[i] > hi + tol || w[i] < lo - tol) return kInf; // outside dom f*
            double ri;
            if (w[i] >= hi - tol)
                ri = std::max(-v[i], 0.0); // normal cone requires v >= 0
            else if (w[i] <= lo + tol)
                ri = std::max(v[i], 0.0);
            else
                ri = std::abs(v[i]);
            r = std::max(r, ri);
        }
        return r;
    }

    double nu() const { return nu_; }
    const Vector& tilt() const { return c_; }

  private:
    double boundary_tol(Index i) const { return 1e-12 * (1.0 + std::abs(c_[i]) + nu_); }

    double nu_;
    Vector c_;
    double offset_;
};

/// Group penalty nu * sum_l ||w_{B_l}||_2. The conjugate prox is the blockwise
/// ball truncation, valid when the diagonal metric is constant within each
/// block (it is for the uniform step matrices used with these penalties).
class GroupBallConjFn final : public ConjMetricProxFn {
  public:
    GroupBallConjFn(double nu, BlockStructure blocks) : nu_(nu), blocks_(std::move(blocks)) {}

    double value(const Vector& w) const override {
        double s = 0.0;
        for (std::size_t l = 0; l < blocks_.block_count(); ++l) {
            const auto& b = blocks_.block(l);
            if (b.length > 0) s += w.segment(b.offset, b.length).norm();
        }
        return nu_ * s;
    }
    Vector conj_prox(const Vector& u, const DiagonalScaling& metric_inv) const override {
        for (std::size_t l = 0; l < blocks_.block_count(); ++l) {
            const auto& b = blocks_.block(l);
            for (Index i = 1; i < b.length; ++i) {
                const double ref = metric_inv[b.offset];
                if (std::abs(metric_inv[b.offset + i] - ref) > 1e-12 * std::abs(ref))
                    throw UnsupportedFunction(
                        "group ball truncation requires a blockwise-constant metric");
            }
        }
        return truncate_blocks(u, nu_, blocks_);
    }
    Vector conj_subgrad(const Vector& w, const Vector& target) const override {
        Vector s = Vector::Zero(w.size());
        for (std::size_t l = 0; l < blocks_.block_count(); ++l) {
            const auto& b = blocks_.block(l);
            if (b.length == 0) continue;
            const auto wb = w.segment(b.offset, b.length);
            const double norm = wb.norm();
            if (norm >= nu_ * (1.0 - 1e-12) && norm > 0.0) {
                // normal cone: nonnegative multiples of w_B
                const double scale = std::max(target.segment(b.offset, b.length).dot(wb), 0.0) /
                                     (norm * norm);
                s.segment(b.offset, b.length) = scale * wb;
            }
        }
        return s;
    }

  private:
    double nu_;
    BlockStructure blocks_;
};

/// (alpha/2) ||w - a||^2 + <w, c> + offset; both prox directions in closed form.
class QuadraticConjFn final : public ConjMetricProxFn {
  public:
    QuadraticConjFn(double alpha, Vector a, Vector c, double offset = 0.0)
        : alpha_(alpha), a_(std::move(a)), c_(std::move(c)), offset_(offset) {}

    double value(const Vector& w) const override {
        return 0.5 * alpha_ * (w - a_).squaredNorm() + c_.dot(w) + offset_;
    }
    Vector conj_prox(const Vector& u, const DiagonalScaling& metric_inv) const override {
        Vector w(u.size());
        for (Index i = 0; i < u.size(); ++i)
            w[i] = (c_[i] / alpha_ - a_[i] + metric_inv[i] * u[i]) / (1.0 / alpha_ + metric_inv[i]);
        return w;
    }
    Vector prox(const Vector& q, const DiagonalScaling& metric) const override {
        Vector w(q.size());
        for (Index i = 0; i < q.size(); ++i)
            w[i] = (alpha_ * a_[i] - c_[i] + metric[i] * q[i]) / (alpha_ + metric[i]);
        return w;
    }
    Vector conj_subgrad(const Vector& w, const Vector&) const override { return grad_conj(w); }
    double mirror_residual(const Vector& w, const Vector& v) const override {
        return (v - grad_conj(w)).lpNorm<Eigen::Infinity>();
    }

  private:
    Vector grad_conj(const Vector& w) const { return (w - c_) / alpha_ + a_; }

    double alpha_;
    Vector a_, c_;
    double offset_;
};

/// (alpha/2) ||w - a||^2 + nu*||w||_1 + <w, c> + offset: a strongly convex
/// nonsmooth dual-side term. The primal prox is a coordinatewise shrink; the
/// conjugate prox goes through the Moreau decomposition.
class QuadL1TiltConjFn final : public ConjMetricProxFn {
  public:
    QuadL1TiltConjFn(double alpha, Vector a, double nu, Vector c, double offset = 0.0)
        : alpha_(alpha), a_(std::move(a)), nu_(nu), c_(std::move(c)), offset_(offset) {}

    double value(const Vector& w) const override {
        return 0.5 * alpha_ * (w - a_).squaredNorm() + nu_ * w.lpNorm<1>() + c_.dot(w) + offset_;
    }
    Vector prox(const Vector& q, const DiagonalScaling& metric) const override {
        Vector w(q.size());
        for (Index i = 0; i < q.size(); ++i) {
            const double m = metric[i];
            w[i] = soft_threshold((alpha_ * a_[i] - c_[i] + m * q[i]) / (alpha_ + m),
                                  nu_ / (alpha_ + m));
        }
        return w;
    }
    Vector conj_prox(const Vector& u, const DiagonalScaling& metric_inv) const override {
        const DiagonalScaling sigma = metric_inv.inverse();
        return u - sigma.apply(prox(metric_inv.apply(u), sigma));
    }
    Vector conj_subgrad(const Vector& w, const Vector&) const override { return grad_conj(w); }
    double mirror_residual(const Vector& w, const Vector& v) const override {
        return (v - grad_conj(w)).lpNorm<Eigen::Infinity>();
    }

  private:
    // f strongly convex, so f* is differentiable: grad f*(w) = argmin_u f(u) - <w,u>
    Vector grad_conj(const Vector& w) const {
        Vector g(w.size());
        for (Index i = 0; i < w.size(); ++i)
            g[i] = soft_threshold(a_[i] + (w[i] - c_[i]) / alpha_, nu_ / alpha_);
        return g;
    }

    double alpha_;
    Vector a_;
    double nu_;
    Vector c_;
    double offset_;
};

} // namespace mocca
