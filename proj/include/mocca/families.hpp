#pragma once

#include <functional>
#include <memory>
#include <utility>

#include "mocca/functions.hpp"
#include "mocca/linops.hpp"
#include "mocca/prox.hpp"

namespace mocca {

/// Family of local convex approximations to the term composed with the linear
/// operator: expand(v) produces the approximation taken at the expansion
/// point v, exposed through its conjugate prox.
struct TransformedFamily {
    std::function<double(const Vector&)> base_value;
    std::function<ConjProxPtr(const Vector&)> expand;
    Index dim = 0;
};

/// Family of local convex approximations to the direct term: expand(z)
/// produces the approximation taken at z, exposed through its metric prox.
/// When the base value itself depends on the operator image (the split
/// penalty arrangement), base_value_with_image lets callers reuse an
/// already-computed K x instead of paying another application.
struct DirectFamily {
    std::function<double(const Vector&)> base_value;
    std::function<MetricProxPtr(const Vector&)> expand;
    Index dim = 0;
    std::function<double(const Vector&, const Vector&)> base_value_with_image;

    double value_at(const Vector& x, const Vector& k_x) const {
        return base_value_with_image ? base_value_with_image(x, k_x) : base_value(x);
    }
};

/// The composite problem: minimize transformed(op x) + direct(x).
struct CompositeProblem {
    TransformedFamily transformed;
    DirectFamily direct;
    LinearOperator op;

    double objective(const Vector& x) const {
        const Vector k_x = op.apply(x);
        const double gx = direct.value_at(x, k_x);
        if (gx == kInf) return kInf;
        return transformed.base_value(k_x) + gx;
    }
};

inline void validate_dims(const CompositeProblem& p) {
    if (p.op.cols() != p.direct.dim || p.op.rows() != p.transformed.dim)
        throw InvalidDimension("composite problem: operator is " + std::to_string(p.op.rows()) +
                               "x" + std::to_string(p.op.cols()) + " but term dims are " +
                               std::to_string(p.transformed.dim) + " / " +
                               std::to_string(p.direct.dim));
}

/// A convex term used as its own approximation at every expansion point.
inline TransformedFamily trivial_transformed(ConjProxPtr fn, Index dim) {
    return {[fn](const Vector& w) { return fn->value(w); },
            [fn](const Vector&) { return fn; }, dim};
}

inline DirectFamily trivial_direct(MetricProxPtr fn, Index dim) {
    return {[fn](const Vector& x) { return fn->value(x); },
            [fn](const Vector&) { return fn; }, dim};
}

/// Convex-plus-differentiable split g + h with the differentiable part
/// linearized at the expansion point.
inline DirectFamily linearized_direct(MetricProxPtr g_cvx, SmoothTerm h) {
    auto base = [g_cvx, h](const Vector& x) { return g_cvx->value(x) + h.value(x); };
    auto expand = [g_cvx, h](const Vector& z) -> MetricProxPtr {
        Vector grad = h.gradient(z);
        const double c0 = h.value(z) - grad.dot(z);
        return std::make_shared<LinearTiltFn>(g_cvx, std::move(grad), c0);
    };
    return {std::move(base), std::move(expand), h.dim};
}

/// Family for the nonconvex log penalty nu*logL1_beta: the approximation at v
/// is the tilted l1 function nu*||w||_1 + nu*[h_beta(v) + <w - v, grad h_beta(v)>].
inline TransformedFamily logl1_transformed(double nu, double beta, Index dim) {
    auto base = [nu, beta](const Vector& w) { return nu * logl1(w, beta); };
    auto expand = [nu, beta](const Vector& v) -> ConjProxPtr {
        Vector c = nu * grad_h_beta(v, beta);
        const double offset = nu * h_beta(v, beta) - c.dot(v);
        return std::make_shared<BoxConjFn>(nu, std::move(c), offset);
    };
    return {std::move(base), std::move(expand), dim};
}

/// Log-TV composite with the penalty kept whole inside the transformed term:
/// F = nu*logL1_beta approximated by tilted l1, G = loss unchanged.
inline CompositeProblem make_logtv_natural(double nu, double beta, LinearOperator k,
                                           DirectFamily loss) {
    CompositeProblem p{logl1_transformed(nu, beta, k.rows()), std::move(loss), std::move(k)};
    validate_dims(p);
    return p;
}

/// Log-TV composite with the penalty split: F = nu*||.||_1 stays convex while
/// the concave gap nu*h_beta(K x) joins the loss and is linearized at Kz.
inline CompositeProblem make_logtv_split(double nu, double beta, LinearOperator k,
                                         DirectFamily loss) {
    auto base = [nu, beta, k, inner = loss.base_value](const Vector& x) {
        const double gx = inner(x);
        if (gx == kInf) return kInf;
        return gx + nu * h_beta(k.apply(x), beta);
    };
    auto base_img = [nu, beta, inner = loss.base_value](const Vector& x, const Vector& kx) {
        const double gx = inner(x);
        if (gx == kInf) return kInf;
        return gx + nu * h_beta(kx, beta);
    };
    auto expand = [nu, beta, k, inner = loss.expand](const Vector& z) -> MetricProxPtr {
        const Vector kz = k.apply(z);
        const Vector gh = grad_h_beta(kz, beta);
        Vector c = nu * k.adjoint_apply(gh);
        const double c0 = nu * h_beta(kz, beta) - nu * gh.dot(kz);
        return std::make_shared<LinearTiltFn>(inner(z), std::move(c), c0);
    };
    DirectFamily g{std::move(base), std::move(expand), loss.dim, std::move(base_img)};
    CompositeProblem p{trivial_transformed(std::make_shared<BoxConjFn>(nu, k.rows()), k.rows()),
                       std::move(g), std::move(k)};
    validate_dims(p);
    return p;
}

/// Errors-in-variables least squares with the Gram matrix debiased by
/// sigma_a^2. `normalized` selects the 1/n scaling; the unnormalized form
/// drops it (the Gram term is Z^T Z - n sigma_a^2 I and the linear term Z^T b).
inline SmoothTerm make_eiv_loss(const Matrix& z, const Vector& b, double sigma_a,
                                bool normalized = true) {
    const Index n = z.rows();
    const double gram_scale = normalized ? 1.0 / static_cast<double>(n) : 1.0;
    const double ridge = normalized ? sigma_a * sigma_a : static_cast<double>(n) * sigma_a * sigma_a;
    auto h = std::make_shared<Matrix>(gram_scale * (z.transpose() * z));
    h->diagonal().array() -= ridge;
    auto q = std::make_shared<Vector>(gram_scale * (z.transpose() * b));
    return {[h, q](const Vector& x) { return 0.5 * x.dot(*h * x) - q->dot(x); },
            [h, q](const Vector& x) { return Vector(*h * x - *q); }, z.cols()};
}

/// Curvature-matched approximations for the errors-in-variables loss:
/// G_z(x) = L(x) + (s/2) ||x - z||^2 with s the debiasing ridge, which is the
/// convex quadratic 1/2 x^T Gram x - x^T (q + s z) up to a constant. All
/// expansions share one factorization cache. An optional l1-ball radius
/// restricts the domain.
inline DirectFamily eiv_curvature_direct(const Matrix& z_mat, const Vector& b, double sigma_a,
                                         bool normalized = true, double radius = kInf) {
    const Index n = z_mat.rows();
    const double gram_scale = normalized ? 1.0 / static_cast<double>(n) : 1.0;
    const double s = normalized ? sigma_a * sigma_a : static_cast<double>(n) * sigma_a * sigma_a;
    auto gram = std::make_shared<Matrix>(gram_scale * (z_mat.transpose() * z_mat));
    auto q = std::make_shared<Vector>(gram_scale * (z_mat.transpose() * b));
    auto cache = std::make_shared<QuadSolveCache>();

    auto base = [gram, q, s, radius](const Vector& x) {
        if (x.lpNorm<1>() > radius) return kInf;
        return 0.5 * x.dot(*gram * x) - 0.5 * s * x.squaredNorm() - q->dot(x);
    };
    auto expand = [gram, q, s, cache, radius](const Vector& z) -> MetricProxPtr {
        return std::make_shared<QuadraticFn>(gram, Vector(*q + s * z),
                                             0.5 * s * z.squaredNorm(), cache, radius);
    };
    return {std::move(base), std::move(expand), z_mat.cols()};
}

} // namespace mocca
