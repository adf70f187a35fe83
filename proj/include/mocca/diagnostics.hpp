#pragma once

#include <cmath>

#include "mocca/families.hpp"
#include "mocca/trace.hpp"
#include "mocca/types.hpp"

namespace mocca {

/// Euclidean norm of the stacked primal and dual differences.
inline double change_norm(const Vector& x_prev, const Vector& w_prev, const Vector& x_cur,
                          const Vector& w_cur) {
    return std::sqrt((x_prev - x_cur).squaredNorm() + (w_prev - w_cur).squaredNorm());
}

/// Sum of squared residuals certifying proximity to a critical point:
///   ||Kx - s1||^2 + ||-K^T w - s2||^2 + ||z - x||^2 + ||v - Kx||^2
/// with s1 in d f*_v(w), s2 in d g_z(x) chosen closest to the residual they
/// cancel. Costs one operator apply and one adjoint apply.
inline double optimality_gap(const ConjMetricProxFn& fv, const MetricProxFn& gz,
                             const LinearOperator& k, const Vector& x, const Vector& w,
                             const Vector& z, const Vector& v) {
    const Vector kx = k.apply(x);
    const Vector neg_ktw = -k.adjoint_apply(w);
    const Vector s1 = fv.conj_subgrad(w, kx);
    const Vector s2 = gz.subgrad(x, neg_ktw);
    return (kx - s1).squaredNorm() + (neg_ktw - s2).squaredNorm() + (z - x).squaredNorm() +
           (v - kx).squaredNorm();
}

inline double optimality_gap(const CompositeProblem& problem, const Vector& x, const Vector& w,
                             const Vector& z, const Vector& v) {
    const auto fv = problem.transformed.expand(v);
    const auto gz = problem.direct.expand(z);
    return optimality_gap(*fv, *gz, problem.op, x, w, z, v);
}

/// Composite value transformed(op x) + direct(x); +inf off-domain.
inline double objective(const CompositeProblem& problem, const Vector& x) {
    return problem.objective(x);
}

} // namespace mocca
