#pragma once

#include <functional>
#include <random>

#include "mocca/types.hpp"

namespace mocca::testing {

inline Vector random_vector(std::mt19937& eng, Index n, double scale = 1.0) {
    std::normal_distribution<double> dist(0.0, scale);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = dist(eng);
    return v;
}

/// Brute-force minimizer over a uniform 1d grid.
inline double grid_argmin_1d(const std::function<double(double)>& f, double lo, double hi,
                             double step) {
    double best_x = lo, best_v = f(lo);
    for (double x = lo; x <= hi; x += step) {
        const double v = f(x);
        if (v < best_v) {
            best_v = v;
            best_x = x;
        }
    }
    return best_x;
}

/// Brute-force minimizer over a uniform 2d grid.
inline Vector grid_argmin_2d(const std::function<double(const Vector&)>& f, double lo, double hi,
                             double step) {
    Vector best(2), p(2);
    best << lo, lo;
    double best_v = f(best);
    for (double x = lo; x <= hi; x += step)
        for (double y = lo; y <= hi; y += step) {
            p << x, y;
            const double v = f(p);
            if (v < best_v) {
                best_v = v;
                best = p;
            }
        }
    return best;
}

/// Centered finite-difference gradient.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                          double h = 1e-6) {
    Vector g(x.size());
    Vector p = x;
    for (Index i = 0; i < x.size(); ++i) {
        p[i] = x[i] + h;
        const double up = f(p);
        p[i] = x[i] - h;
        const double down = f(p);
        p[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

} // namespace mocca::testing
