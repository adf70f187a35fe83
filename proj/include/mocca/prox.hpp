#pragma once

#include <algorithm>
#include <cmath>

#include "mocca/linops.hpp"
#include "mocca/types.hpp"

namespace mocca {

inline double soft_threshold(double v, double thresh) {
    if (v > thresh) return v - thresh;
    if (v < -thresh) return v + thresh;
    return 0.0;
}

/// argmin_x nu*||x||_1 + 1/2 ||x - u||^2_D, entrywise soft-threshold at nu/D_ii.
inline Vector prox_weighted_l1(const Vector& u, const DiagonalScaling& d, double nu) {
    Vector x(u.size());
    for (Index i = 0; i < u.size(); ++i) x[i] = soft_threshold(u[i], nu / d[i]);
    return x;
}

/// Conjugate metric prox of the tilted l1 function nu*||.||_1 + <., c>:
/// clips u - c entrywise to [-nu, nu], then adds c back. Valid for any
/// diagonal metric by separability of the box.
inline Vector truncate_tilted(const Vector& u, double nu, const Vector& c) {
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) w[i] = c[i] + std::clamp(u[i] - c[i], -nu, nu);
    return w;
}

inline Vector truncate_tilted(const Vector& u, double nu) {
    Vector w(u.size());
    for (Index i = 0; i < u.size(); ++i) w[i] = std::clamp(u[i], -nu, nu);
    return w;
}

/// Blockwise projection onto balls of radius nu: each block is scaled by
/// min{1, nu/||u_B||_2}. Zero blocks are left unchanged.
inline Vector truncate_blocks(const Vector& u, double nu, const BlockStructure& blocks) {
    Vector w = u;
    for (std::size_t l = 0; l < blocks.block_count(); ++l) {
        const auto& b = blocks.block(l);
        if (b.length == 0) continue;
        const double norm = u.segment(b.offset, b.length).norm();
        if (norm > nu) w.segment(b.offset, b.length) *= nu / norm;
    }
    return w;
}

/// argmin { 1/2 ||x - q||^2_D : ||x||_1 <= R }. When the constraint is
/// inactive, returns q itself. Otherwise bisects on the multiplier mu of the
/// weighted soft-threshold x_i(mu) = S_{mu/D_ii}(q_i); the l1 norm of x(mu)
/// is monotone in mu.
inline Vector project_weighted_l1_ball(const Vector& q, const DiagonalScaling& d, double R) {
    if (R < 0.0) throw InvalidDimension("project_weighted_l1_ball: R must be nonnegative");
    if (q.lpNorm<1>() <= R) return q;
    if (R == 0.0) return Vector::Zero(q.size());

    const auto shrink = [&](double mu) {
        Vector x(q.size());
        for (Index i = 0; i < q.size(); ++i) x[i] = soft_threshold(q[i], mu / d[i]);
        return x;
    };
    double lo = 0.0;
    double hi = 0.0;
    for (Index i = 0; i < q.size(); ++i) hi = std::max(hi, std::abs(q[i]) * d[i]);
    Vector x = shrink(hi); // zero vector
    for (int it = 0; it < 200; ++it) {
        const double mu = 0.5 * (lo + hi);
        x = shrink(mu);
        const double n1 = x.lpNorm<1>();
        if (std::abs(n1 - R) <= 1e-10) return x;
        if (n1 > R)
            lo = mu;
        else
            hi = mu;
    }
    return shrink(hi); // feasible side of the last bracket
}

/// h_beta(w) = sum_i [beta*log(1 + |w_i|/beta) - |w_i|], the differentiable
/// concave gap between the log penalty and the l1 norm.
inline double h_beta(const Vector& w, double beta) {
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
        const double a = std::abs(w[i]);
        s += beta * std::log1p(a / beta) - a;
    }
    return s;
}

/// (grad h_beta)_i = -w_i / (beta + |w_i|).
inline Vector grad_h_beta(const Vector& w, double beta) {
    Vector g(w.size());
    for (Index i = 0; i < w.size(); ++i) g[i] = -w[i] / (beta + std::abs(w[i]));
    return g;
}

/// logL1_beta(w) = sum_i beta*log(1 + |w_i|/beta).
inline double logl1(const Vector& w, double beta) {
    double s = 0.0;
    for (Index i = 0; i < w.size(); ++i) s += beta * std::log1p(std::abs(w[i]) / beta);
    return s;
}

} // namespace mocca
