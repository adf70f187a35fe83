#pragma once

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mocca/diagnostics.hpp"
#include "mocca/families.hpp"
#include "mocca/trace.hpp"

namespace mocca {

struct SolverConfig {
    DiagonalScaling sigma; // dual step matrix, size m
    DiagonalScaling t;     // primal step matrix, size d
    double theta = 1.0;
    int max_outer = 1000;
    std::vector<int> inner_schedule; // Algorithm-2 loop lengths; last entry repeats
    double stop_tol = 1e-8;
    double divergence_guard = 1e12;
    bool record_opt_gap = false;
};

inline void validate(const SolverConfig& cfg, const CompositeProblem& problem) {
    validate_dims(problem);
    if (cfg.theta < 0.0 || cfg.theta > 1.0)
        throw ConfigError("theta must lie in [0, 1]");
    if (!(cfg.stop_tol > 0.0)) throw ConfigError("stop_tol must be positive");
    if (cfg.max_outer < 0) throw ConfigError("max_outer must be nonnegative");
    for (int l : cfg.inner_schedule)
        if (l < 1) throw ConfigError("inner loop lengths must be >= 1");
    if (cfg.sigma.size() != problem.op.rows() || cfg.t.size() != problem.op.cols())
        throw ConfigError("step matrix sizes do not match the operator");
}

struct SolverInit {
    Vector x0, w0;               // empty means zero
    std::optional<Vector> z0, v0; // defaults: z0 = x0, v0 = K x0
};

struct SolverState {
    Vector x, w, x_prev, z, v;
};

struct MoccaResult {
    SolverState state;
    IterationTrace trace;
};

/// Per-iteration snapshot handed to observers of the basic algorithm. The
/// expansions (z, v) are the ones used to compute this step; (z_next, v_next)
/// are the mirrored updates derived from it.
struct IterationView {
    int t; // 1-based completed iteration
    const Vector& x_prev;
    const Vector& w_prev;
    const Vector& x;
    const Vector& w;
    const Vector& z;
    const Vector& v;
    const Vector& z_next;
    const Vector& v_next;
    const Vector& k_xbar;
};
using IterationObserver = std::function<void(const IterationView&)>;

struct InnerStepView {
    int t;
    int l;
    const Vector& x_prev;
    const Vector& w_prev;
    const Vector& x;
    const Vector& w;
    const Vector& k_xbar;
};
using InnerStepObserver = std::function<void(const InnerStepView&)>;

/// Outer snapshot of the averaged algorithm: start/end of the inner loop and
/// the averaged point plus the next expansion pair.
struct OuterStepView {
    int t;
    int inner_len;
    const Vector& x_start;
    const Vector& w_start;
    const Vector& x_last;
    const Vector& w_last;
    const Vector& x_avg;
    const Vector& w_avg;
    const Vector& z_next;
    const Vector& v_next;
};
using OuterStepObserver = std::function<void(const OuterStepView&)>;

namespace detail {

inline double elapsed_ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

inline bool diverged(const Vector& x, const Vector& w, double obj, double guard) {
    if (!x.allFinite() || !w.allFinite() || std::isnan(obj)) return true;
    return x.lpNorm<Eigen::Infinity>() > guard || w.lpNorm<Eigen::Infinity>() > guard ||
           std::abs(obj) > guard;
}

inline Vector init_or_zero(const Vector& given, Index n) {
    return given.size() == 0 ? Vector::Zero(n) : given;
}

} // namespace detail

struct StepResult {
    Vector x, w, k_x, k_xbar;
};

/// One primal-dual step on the frozen approximations g_z, f_v:
///   x' = prox_{g_z}(x - T K^T w) in the T^{-1} metric,
///   w' = conj-prox_{f_v}(w + Sigma K xbar) in the Sigma^{-1} metric,
/// with xbar = x' + theta (x' - x). `k_x` carries K x so the extrapolated
/// image is formed by linearity instead of a second apply.
inline StepResult step_zv_cached(const Vector& x, const Vector& w, const Vector& k_x,
                                 const MetricProxFn& gz, const ConjMetricProxFn& fv,
                                 const LinearOperator& k, const DiagonalScaling& sigma,
                                 const DiagonalScaling& sigma_inv, const DiagonalScaling& t,
                                 const DiagonalScaling& t_inv, double theta) {
    Vector x_new = gz.prox(x - t.apply(k.adjoint_apply(w)), t_inv);
    Vector k_x_new = k.apply(x_new);
    Vector k_xbar = k_x_new + theta * (k_x_new - k_x);
    Vector w_new = fv.conj_prox(w + sigma.apply(k_xbar), sigma_inv);
    return {std::move(x_new), std::move(w_new), std::move(k_x_new), std::move(k_xbar)};
}

/// Convenience form computing K x itself (three operator applications).
inline std::pair<Vector, Vector> step_zv(const Vector& x, const Vector& w,
                                         const MetricProxFn& gz, const ConjMetricProxFn& fv,
                                         const LinearOperator& k, const DiagonalScaling& sigma,
                                         const DiagonalScaling& t, double theta) {
    auto r = step_zv_cached(x, w, k.apply(x), gz, fv, k, sigma, sigma.inverse(), t, t.inverse(),
                            theta);
    return {std::move(r.x), std::move(r.w)};
}

/// Mirrored expansion update of the basic algorithm:
///   z = x_cur,  v = Sigma^{-1}(w_prev - w_cur) + K xbar.
inline std::pair<Vector, Vector> update_expansion_basic(const Vector& w_prev,
                                                        const Vector& w_cur,
                                                        const Vector& k_xbar,
                                                        const DiagonalScaling& sigma,
                                                        const Vector& x_cur) {
    return {x_cur, sigma.inverse().apply(w_prev - w_cur) + k_xbar};
}

/// Basic mirrored algorithm: one primal-dual step per iteration, expansion
/// points refreshed from the mirrored dual update each time. Divergence is
/// reported through the trace status together with the partial trace.
inline MoccaResult run_mocca_basic(const CompositeProblem& problem, const SolverConfig& cfg,
                                   const SolverInit& init = {},
                                   const IterationObserver& observer = {}) {
    validate(cfg, problem);
    const auto start = std::chrono::steady_clock::now();
    const Index d = problem.op.cols(), m = problem.op.rows();
    const DiagonalScaling sigma_inv = cfg.sigma.inverse();
    const DiagonalScaling t_inv = cfg.t.inverse();

    Vector x = detail::init_or_zero(init.x0, d);
    Vector w = detail::init_or_zero(init.w0, m);
    Vector k_x = problem.op.apply(x);
    Vector z = init.z0.value_or(x);
    Vector v = init.v0.value_or(k_x);
    Vector x_prev = x, w_prev = w;

    IterationTrace trace;
    trace.records.reserve(static_cast<std::size_t>(cfg.max_outer));
    MetricProxPtr gz = problem.direct.expand(z);
    ConjProxPtr fv = problem.transformed.expand(v);

    for (int t = 0; t < cfg.max_outer; ++t) {
        x_prev = x;
        w_prev = w;
        auto step = step_zv_cached(x, w, k_x, *gz, *fv, problem.op, cfg.sigma, sigma_inv, cfg.t,
                                   t_inv, cfg.theta);
        ++trace.kt_applies;
        ++trace.k_applies;
        x = std::move(step.x);
        w = std::move(step.w);

        const double change = change_norm(x_prev, w_prev, x, w);
        const double obj =
            problem.transformed.base_value(step.k_x) + problem.direct.value_at(x, step.k_x);
        std::optional<double> gap;
        if (cfg.record_opt_gap) gap = optimality_gap(*fv, *gz, problem.op, x, w, z, v);

        Vector z_next = x;
        Vector v_next = sigma_inv.apply(w_prev - w) + step.k_xbar;
        if (observer)
            observer(IterationView{t + 1, x_prev, w_prev, x, w, z, v, z_next, v_next,
                                   step.k_xbar});

        trace.records.push_back(
            {t + 1, t + 1, obj, change, gap, detail::elapsed_ms_since(start)});

        z = std::move(z_next);
        v = std::move(v_next);
        k_x = std::move(step.k_x);
        gz = problem.direct.expand(z);
        fv = problem.transformed.expand(v);

        if (detail::diverged(x, w, obj, cfg.divergence_guard)) {
            trace.status = RunStatus::diverged;
            break;
        }
        if (change < cfg.stop_tol) {
            trace.status = RunStatus::converged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {{std::move(x), std::move(w), std::move(x_prev), std::move(z), std::move(v)},
            std::move(trace)};
}

/// Averaged variant: each outer stage freezes the expansions, runs L_t
/// primal-dual steps, then continues from the inner-loop averages. The next
/// dual expansion point is the average of the per-step mirrored points.
/// Running sums only; no inner iterates are stored.
inline MoccaResult run_mocca_stable(const CompositeProblem& problem, const SolverConfig& cfg,
                                    const SolverInit& init = {},
                                    const InnerStepObserver& inner_observer = {},
                                    const OuterStepObserver& outer_observer = {}) {
    validate(cfg, problem);
    const auto start = std::chrono::steady_clock::now();
    const Index d = problem.op.cols(), m = problem.op.rows();
    const DiagonalScaling sigma_inv = cfg.sigma.inverse();
    const DiagonalScaling t_inv = cfg.t.inverse();
    const auto loop_len = [&cfg](int t) {
        if (cfg.inner_schedule.empty()) return 1;
        const std::size_t i = std::min(static_cast<std::size_t>(t), cfg.inner_schedule.size() - 1);
        return cfg.inner_schedule[i];
    };

    Vector x = detail::init_or_zero(init.x0, d);
    Vector w = detail::init_or_zero(init.w0, m);
    Vector k_x = problem.op.apply(x);
    Vector z = init.z0.value_or(x);
    Vector v = init.v0.value_or(k_x);
    Vector x_prev = x, w_prev = w;

    IterationTrace trace;
    MetricProxPtr gz = problem.direct.expand(z);
    ConjProxPtr fv = problem.transformed.expand(v);
    long long cum_inner = 0;

    for (int t = 0; t < cfg.max_outer; ++t) {
        const int L = loop_len(t);
        Vector xs = x, ws = w, k_xs = k_x;
        Vector sum_x = Vector::Zero(d), sum_w = Vector::Zero(m);
        Vector sum_v = Vector::Zero(m), sum_kx = Vector::Zero(m);
        bool blew_up = false;
        for (int l = 1; l <= L; ++l) {
            auto step = step_zv_cached(xs, ws, k_xs, *gz, *fv, problem.op, cfg.sigma, sigma_inv,
                                       cfg.t, t_inv, cfg.theta);
            ++trace.kt_applies;
            ++trace.k_applies;
            ++cum_inner;
            sum_x += step.x;
            sum_w += step.w;
            sum_v += sigma_inv.apply(ws - step.w) + step.k_xbar;
            sum_kx += step.k_x;
            if (inner_observer)
                inner_observer(InnerStepView{t + 1, l, xs, ws, step.x, step.w, step.k_xbar});
            xs = std::move(step.x);
            ws = std::move(step.w);
            k_xs = std::move(step.k_x);
            if (!xs.allFinite() || !ws.allFinite()) {
                blew_up = true;
                break;
            }
        }
        x_prev = x;
        w_prev = w;
        const double inv_l = 1.0 / static_cast<double>(L);
        Vector x_next = sum_x * inv_l;
        Vector w_next = sum_w * inv_l;
        Vector v_next = sum_v * inv_l;
        Vector k_x_next = sum_kx * inv_l; // linearity: K of the average
        const double change = change_norm(x, w, x_next, w_next);
        const double obj = blew_up ? std::numeric_limits<double>::quiet_NaN()
                                   : problem.transformed.base_value(k_x_next) +
                                         problem.direct.value_at(x_next, k_x_next);
        std::optional<double> gap;
        if (cfg.record_opt_gap && !blew_up)
            gap = optimality_gap(*fv, *gz, problem.op, x_next, w_next, z, v);
        if (outer_observer)
            outer_observer(OuterStepView{t + 1, L, x, w, xs, ws, x_next, w_next, x_next, v_next});

        trace.records.push_back({t + 1, cum_inner, obj, change, gap,
                                 detail::elapsed_ms_since(start)});

        x = std::move(x_next);
        w = std::move(w_next);
        k_x = std::move(k_x_next);
        z = x;
        v = std::move(v_next);
        gz = problem.direct.expand(z);
        fv = problem.transformed.expand(v);

        if (blew_up || detail::diverged(x, w, obj, cfg.divergence_guard)) {
            trace.status = RunStatus::diverged;
            break;
        }
        if (change < cfg.stop_tol) {
            trace.status = RunStatus::converged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {{std::move(x), std::move(w), std::move(x_prev), std::move(z), std::move(v)},
            std::move(trace)};
}

struct CpStepView {
    int t;
    const Vector& x_prev;
    const Vector& w_prev;
    const Vector& x;
    const Vector& w;
};
using CpObserver = std::function<void(const CpStepView&)>;

/// Plain preconditioned primal-dual iteration for a convex problem: the
/// approximations are expanded once at the starting points and never
/// refreshed, so for trivial convex families this is exactly the
/// extrapolated proximal scheme, written as its own straight-line loop.
inline MoccaResult run_cp(const CompositeProblem& problem, const SolverConfig& cfg,
                          const SolverInit& init = {}, const CpObserver& observer = {}) {
    validate(cfg, problem);
    const auto start = std::chrono::steady_clock::now();
    const Index d = problem.op.cols(), m = problem.op.rows();
    const DiagonalScaling sigma_inv = cfg.sigma.inverse();
    const DiagonalScaling t_inv = cfg.t.inverse();

    Vector x = detail::init_or_zero(init.x0, d);
    Vector w = detail::init_or_zero(init.w0, m);
    Vector k_x = problem.op.apply(x);
    Vector z = init.z0.value_or(x);
    Vector v = init.v0.value_or(k_x);
    Vector x_prev = x, w_prev = w;
    const MetricProxPtr g = problem.direct.expand(z);
    const ConjProxPtr f = problem.transformed.expand(v);

    IterationTrace trace;
    trace.records.reserve(static_cast<std::size_t>(cfg.max_outer));
    for (int t = 0; t < cfg.max_outer; ++t) {
        x_prev = x;
        w_prev = w;
        Vector x_new = g->prox(x - cfg.t.apply(problem.op.adjoint_apply(w)), t_inv);
        Vector k_x_new = problem.op.apply(x_new);
        Vector k_xbar = k_x_new + cfg.theta * (k_x_new - k_x);
        w = f->conj_prox(w + cfg.sigma.apply(k_xbar), sigma_inv);
        x = std::move(x_new);
        k_x = std::move(k_x_new);
        ++trace.kt_applies;
        ++trace.k_applies;

        const double change = change_norm(x_prev, w_prev, x, w);
        const double obj = problem.transformed.base_value(k_x) + problem.direct.value_at(x, k_x);
        if (observer) observer(CpStepView{t + 1, x_prev, w_prev, x, w});
        trace.records.push_back({t + 1, t + 1, obj, change, std::nullopt,
                                 detail::elapsed_ms_since(start)});

        if (detail::diverged(x, w, obj, cfg.divergence_guard)) {
            trace.status = RunStatus::diverged;
            break;
        }
        if (change < cfg.stop_tol) {
            trace.status = RunStatus::converged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {{std::move(x), std::move(w), std::move(x_prev), std::move(z), std::move(v)},
            std::move(trace)};
}

struct AdmmInit {
    Vector x0;                // empty means zero
    std::optional<Vector> u0; // default K x0
    Vector delta0;            // empty means zero
};

struct AdmmState {
    Vector x, u, delta;
};

struct AdmmResult {
    AdmmState state;
    IterationTrace trace;
};

struct AdmmStepView {
    int t;
    const Vector& x;
    const Vector& u;
    const Vector& delta;
    const Vector& w_equiv; // Sigma(Kx - u) + Delta at the new iterates
};
using AdmmObserver = std::function<void(const AdmmStepView&)>;

/// Split-variable form of the mirrored algorithm (theta = 1 correspondence):
/// expansions are taken at (x_t, u_t). The x update is Algorithm's
/// preconditioned minimization, solved through the completed square
/// x_t - T K^T [Sigma(K x_t - u_t) + Delta_t]; the u update is the primal
/// metric prox of the current dual-side approximation under Sigma.
inline AdmmResult run_admm(const CompositeProblem& problem, const SolverConfig& cfg,
                           const AdmmInit& init = {}, const AdmmObserver& observer = {},
                           bool check_precondition = true) {
    validate(cfg, problem);
    const auto start = std::chrono::steady_clock::now();
    const Index d = problem.op.cols(), m = problem.op.rows();
    const DiagonalScaling sigma_inv = cfg.sigma.inverse();
    const DiagonalScaling t_inv = cfg.t.inverse();

    IterationTrace trace;
    if (check_precondition) {
        if (d > 2000) {
            trace.warnings.push_back("precondition check skipped: dimension above dense cap");
        } else {
            Matrix kd = to_dense(problem.op);
            Matrix pc = Matrix(t_inv.entries().asDiagonal()) -
                        kd.transpose() * cfg.sigma.entries().asDiagonal() * kd;
            Eigen::SelfAdjointEigenSolver<Matrix> es(pc, Eigen::EigenvaluesOnly);
            const double min_eig = es.eigenvalues().minCoeff();
            if (min_eig < -1e-10)
                trace.warnings.push_back("T^{-1} - K^T Sigma K not positive semidefinite "
                                         "(min eigenvalue " +
                                         std::to_string(min_eig) + ")");
        }
    }

    Vector x = detail::init_or_zero(init.x0, d);
    Vector k_x = problem.op.apply(x);
    Vector u = init.u0.value_or(k_x);
    Vector delta = detail::init_or_zero(init.delta0, m);

    for (int t = 0; t < cfg.max_outer; ++t) {
        const Vector w_cur = cfg.sigma.apply(k_x - u) + delta;
        const MetricProxPtr gz = problem.direct.expand(x);
        const ConjProxPtr fu = problem.transformed.expand(u);

        Vector x_new = gz->prox(x - cfg.t.apply(problem.op.adjoint_apply(w_cur)), t_inv);
        Vector k_x_new = problem.op.apply(x_new);
        ++trace.kt_applies;
        ++trace.k_applies;
        Vector delta_new = delta + cfg.sigma.apply(k_x_new - u);
        Vector u_new = fu->prox(k_x_new + sigma_inv.apply(delta_new), cfg.sigma);

        const double change =
            std::sqrt((x_new - x).squaredNorm() + (u_new - u).squaredNorm() +
                      (delta_new - delta).squaredNorm());
        const double obj =
            problem.transformed.base_value(k_x_new) + problem.direct.value_at(x_new, k_x_new);

        x = std::move(x_new);
        u = std::move(u_new);
        delta = std::move(delta_new);
        k_x = std::move(k_x_new);
        if (observer) {
            const Vector w_next = cfg.sigma.apply(k_x - u) + delta;
            observer(AdmmStepView{t + 1, x, u, delta, w_next});
        }
        trace.records.push_back({t + 1, t + 1, obj, change, std::nullopt,
                                 detail::elapsed_ms_since(start)});

        if (detail::diverged(x, u, obj, cfg.divergence_guard)) {
            trace.status = RunStatus::diverged;
            break;
        }
        if (change < cfg.stop_tol) {
            trace.status = RunStatus::converged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {{std::move(x), std::move(u), std::move(delta)}, std::move(trace)};
}

struct ProxGradResult {
    Vector x;
    IterationTrace trace;
};

/// x_{t+1} = prox_{tau g}(x_t - tau grad h(x_t)).
inline ProxGradResult run_prox_grad(const MetricProxFn& g, const SmoothTerm& h, double tau,
                                    const Vector& x0, int iters, double stop_tol = 0.0,
                                    double divergence_guard = 1e12) {
    if (!(tau > 0.0)) throw ConfigError("prox gradient step size must be positive");
    const auto start = std::chrono::steady_clock::now();
    const DiagonalScaling metric = DiagonalScaling::uniform(1.0 / tau, x0.size());
    Vector x = x0;
    IterationTrace trace;
    for (int t = 0; t < iters; ++t) {
        Vector x_new = g.prox(x - tau * h.gradient(x), metric);
        const double change = (x_new - x).norm();
        x = std::move(x_new);
        const double obj = g.value(x) + h.value(x);
        trace.records.push_back({t + 1, t + 1, obj, change, std::nullopt,
                                 detail::elapsed_ms_since(start)});
        if (!x.allFinite() || std::abs(obj) > divergence_guard ||
            x.lpNorm<Eigen::Infinity>() > divergence_guard) {
            trace.status = RunStatus::diverged;
            break;
        }
        if (stop_tol > 0.0 && change < stop_tol) {
            trace.status = RunStatus::converged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {std::move(x), std::move(trace)};
}

struct ApgdProblem {
    SmoothTerm loss;
    LinearOperator k;
    double nu = 0.0;
};

/// Inner prox-loop stopping rule: a fixed number of steps, or relative change
/// between consecutive inner iterates below eps_thresh (with a safety cap).
struct ApgdInnerStop {
    int n_step = 0;
    double eps_thresh = 0.0;
    int max_inner = 10000;

    void validate() const {
        if ((n_step > 0) == (eps_thresh > 0.0))
            throw ConfigError("inner stop: set exactly one of n_step, eps_thresh");
    }
};

struct ApgdInit {
    Vector x0, u0; // empty means zero
};

struct ApgdResult {
    Vector x, u;
    IterationTrace trace;
};

/// Proximal gradient descent with the prox of the transformed l1 penalty
/// approximated by an inner extrapolated primal-dual loop, warm-started from
/// the previous iterates:
///   gradient step, then repeat
///     x' <- (1 + 1/(4 lambda))^{-1} (x' + x_tilde/(4 lambda) - K^T u'/(4 lambda))
///     u' <- Truncate_{[-nu/eta, nu/eta]}(u' + (lambda/2) K xbar')
///   until the stopping rule fires.
inline ApgdResult run_apgd(const ApgdProblem& problem, double eta, double lambda,
                           const ApgdInnerStop& stop, const ApgdInit& init, int outer_iters,
                           double divergence_guard = 1e12, double theta = 1.0) {
    if (!(eta > 0.0) || !(lambda > 0.0)) throw ConfigError("eta and lambda must be positive");
    stop.validate();
    const auto start = std::chrono::steady_clock::now();
    const Index d = problem.k.cols(), m = problem.k.rows();
    const double r = 1.0 / (4.0 * lambda);
    const double scale = 1.0 / (1.0 + r);
    const double box = problem.nu / eta;

    Vector x = detail::init_or_zero(init.x0, d);
    Vector u = detail::init_or_zero(init.u0, m);
    IterationTrace trace;
    long long cum_inner = 0;

    for (int t = 0; t < outer_iters; ++t) {
        const Vector x_prev = x, u_prev = u;
        const Vector x_tilde = x - (1.0 / eta) * problem.loss.gradient(x);
        Vector xp = x, up = u;
        for (int l = 1; l <= std::max(stop.n_step, stop.max_inner); ++l) {
            Vector xp_new = scale * (xp + r * x_tilde - r * problem.k.adjoint_apply(up));
            Vector k_xbar = problem.k.apply(xp_new + theta * (xp_new - xp));
            up = truncate_tilted(up + (lambda / 2.0) * k_xbar, box);
            trace.kt_applies++;
            trace.k_applies++;
            ++cum_inner;
            const double dn = (xp_new - xp).norm();
            const double pn = xp.norm();
            xp = std::move(xp_new);
            if (stop.n_step > 0) {
                if (l >= stop.n_step) break;
            } else {
                const double rel = pn > 0.0 ? dn / pn : (dn > 0.0 ? kInf : 0.0);
                if (rel <= stop.eps_thresh) break;
                if (l >= stop.max_inner) {
                    trace.warnings.push_back("inner loop hit the safety cap at outer step " +
                                             std::to_string(t + 1));
                    break;
                }
            }
            if (!xp.allFinite()) break;
        }
        x = xp;
        u = up;
        const double obj = problem.loss.value(x) + problem.nu * problem.k.apply(x).lpNorm<1>();
        const double change =
            std::sqrt((x - x_prev).squaredNorm() + (u - u_prev).squaredNorm());
        trace.records.push_back({t + 1, cum_inner, obj, change, std::nullopt,
                                 detail::elapsed_ms_since(start)});
        if (detail::diverged(x, u, obj, divergence_guard)) {
            trace.status = RunStatus::diverged;
            break;
        }
    }
    trace.total_elapsed_ms = detail::elapsed_ms_since(start);
    return {std::move(x), std::move(u), std::move(trace)};
}

struct Assumption1Report {
    double min_eig_estimate = 0.0;
    bool satisfied = false;
};

/// Smallest eigenvalue of the step-size block matrix
///   M = [ T^{-1}  -K^T ; -K  Sigma^{-1} ],
/// computed densely. Desk-scale check only.
inline Assumption1Report check_assumption1(const DiagonalScaling& sigma,
                                           const DiagonalScaling& t, const LinearOperator& k) {
    const Index d = k.cols(), m = k.rows();
    if (d + m > 5000)
        throw UnsupportedSize("check_assumption1: dense eigendecomposition capped at d+m <= 5000");
    Matrix big = Matrix::Zero(d + m, d + m);
    big.topLeftCorner(d, d) = Matrix(t.entries().cwiseInverse().asDiagonal());
    big.bottomRightCorner(m, m) = Matrix(sigma.entries().cwiseInverse().asDiagonal());
    const Matrix kd = to_dense(k);
    big.topRightCorner(d, m) = -kd.transpose();
    big.bottomLeftCorner(m, d) = -kd;
    Eigen::SelfAdjointEigenSolver<Matrix> es(big, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    return {min_eig, min_eig >= -1e-10};
}

} // namespace mocca
