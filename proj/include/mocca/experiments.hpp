#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <utility>

#include "mocca/csv.hpp"
#include "mocca/families.hpp"
#include "mocca/solver.hpp"

namespace mocca {

/// Seeded standard-normal stream: mt19937_64 mapped through Box-Muller.
/// The transform is fixed here (rather than std::normal_distribution) so the
/// draw sequence does not depend on the standard library implementation.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1p-53; // (0, 1]
        const double u2 = static_cast<double>(eng_() >> 11) * 0x1p-53;         // [0, 1)
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Penalized least squares with a nonconvex log penalty on two-dimensional
/// differences: 1/2 ||b - Ax||^2 + nu*logL1_beta(K x) on a 25x25 grid.
/// Draw order for a given seed: A row by row, then the noise in b, then
/// (for the errors-in-variables extension) the noise in Z row by row.
struct Sim1Instance {
    Index d1 = 25, d2 = 25;
    Index n = 200;
    double nu = 20.0;
    double beta = 3.0;
    Vector x_true; // column-major vectorization of the block image
    Matrix a;
    Vector b;

    Index dim() const { return d1 * d2; }
    LinearOperator grad_op() const { return make_diff_2d(d1, d2); }
};

struct Sim2Instance {
    Sim1Instance base;
    double sigma_a = 0.2;
    Matrix z;
    std::shared_ptr<const Matrix> gram; // Z^T Z - n sigma_a^2 I
    std::shared_ptr<const Vector> ztb;  // Z^T b
};

inline Vector sim1_true_signal(Index d1 = 25, Index d2 = 25) {
    Vector x = Vector::Zero(d1 * d2);
    const auto in_block = [](Index i, Index lo, Index hi) { return i >= lo && i < hi; };
    for (Index j = 0; j < d2; ++j)
        for (Index i = 0; i < d1; ++i) {
            const bool one = (in_block(i, 0, 5) && in_block(j, 0, 5)) ||
                             (in_block(i, 5, 20) && in_block(j, 5, 20)) ||
                             (in_block(i, 20, 25) && in_block(j, 20, 25));
            if (one) x[i + j * d1] = 1.0;
        }
    return x;
}

inline Sim1Instance gen_sim1(std::uint64_t seed) {
    Sim1Instance inst;
    inst.x_true = sim1_true_signal(inst.d1, inst.d2);
    GaussianStream g(seed);
    inst.a.resize(inst.n, inst.dim());
    for (Index i = 0; i < inst.n; ++i)
        for (Index j = 0; j < inst.dim(); ++j) inst.a(i, j) = g.next();
    inst.b = inst.a * inst.x_true;
    for (Index i = 0; i < inst.n; ++i) inst.b[i] += g.next();
    return inst;
}

inline Sim2Instance gen_sim2(std::uint64_t seed, double sigma_a = 0.2) {
    Sim2Instance inst;
    inst.base = gen_sim1(seed);
    inst.sigma_a = sigma_a;
    GaussianStream g(seed);
    // skip past the draws consumed by the base instance
    for (Index i = 0; i < inst.base.n * inst.base.dim() + inst.base.n; ++i) g.next();
    inst.z.resize(inst.base.n, inst.base.dim());
    for (Index i = 0; i < inst.base.n; ++i)
        for (Index j = 0; j < inst.base.dim(); ++j)
            inst.z(i, j) = inst.base.a(i, j) + sigma_a * g.next();
    auto gram = std::make_shared<Matrix>(inst.z.transpose() * inst.z);
    gram->diagonal().array() -= static_cast<double>(inst.base.n) * sigma_a * sigma_a;
    inst.gram = std::move(gram);
    inst.ztb = std::make_shared<Vector>(inst.z.transpose() * inst.base.b);
    return inst;
}

enum class Sim1Variant { natural, split };

inline const char* to_string(Sim1Variant v) {
    return v == Sim1Variant::natural ? "natural" : "split";
}

inline CompositeProblem sim1_problem(const Sim1Instance& inst, Sim1Variant variant,
                                     const LinearOperator& k) {
    auto loss = QuadraticFn::least_squares(inst.a, inst.b);
    DirectFamily loss_fam = trivial_direct(loss, inst.dim());
    return variant == Sim1Variant::natural
               ? make_logtv_natural(inst.nu, inst.beta, k, std::move(loss_fam))
               : make_logtv_split(inst.nu, inst.beta, k, std::move(loss_fam));
}

inline CompositeProblem sim1_problem(const Sim1Instance& inst, Sim1Variant variant) {
    return sim1_problem(inst, variant, inst.grad_op());
}

/// Step sizes used throughout the first simulation: Sigma = (lambda/2) I_m,
/// T = (1/(4 lambda)) I_d.
inline SolverConfig sim1_config(const CompositeProblem& problem, double lambda, int max_outer,
                                double stop_tol = 1e-6, bool record_opt_gap = false) {
    return SolverConfig{DiagonalScaling::uniform(0.5 * lambda, problem.op.rows()),
                        DiagonalScaling::uniform(0.25 / lambda, problem.op.cols()),
                        1.0,
                        max_outer,
                        {},
                        stop_tol,
                        1e12,
                        record_opt_gap};
}

inline MoccaResult run_sim1(const Sim1Instance& inst, Sim1Variant variant, double lambda,
                            int max_outer = 20000, double stop_tol = 1e-6,
                            bool record_opt_gap = false, const IterationObserver& observer = {}) {
    if (!(lambda > 0.0)) throw ConfigError("run_sim1: lambda must be positive");
    const CompositeProblem problem = sim1_problem(inst, variant);
    return run_mocca_basic(problem, sim1_config(problem, lambda, max_outer, stop_tol,
                                                record_opt_gap),
                           {}, observer);
}

/// The unnormalized errors-in-variables quadratic of the second simulation:
/// 1/2 x^T (Z^T Z - n sigma_a^2 I) x - x^T Z^T b.
inline SmoothTerm sim2_loss(const Sim2Instance& inst) {
    auto gram = inst.gram;
    auto ztb = inst.ztb;
    return {[gram, ztb](const Vector& x) { return 0.5 * x.dot(*gram * x) - ztb->dot(x); },
            [gram, ztb](const Vector& x) { return Vector(*gram * x - *ztb); },
            inst.base.dim()};
}

inline CompositeProblem sim2_mocca_problem(const Sim2Instance& inst, const LinearOperator& k) {
    return CompositeProblem{
        trivial_transformed(std::make_shared<BoxConjFn>(inst.base.nu, k.rows()), k.rows()),
        linearized_direct(std::make_shared<ZeroFn>(), sim2_loss(inst)), k};
}

/// Step-size mapping that makes the mirrored algorithm coincide with the
/// one-inner-step prox-gradient scheme: Sigma = (lambda eta / 2) I_m,
/// T = 1/((4 lambda + 1) eta) I_d.
inline SolverConfig sim2_mocca_config(const CompositeProblem& problem, double eta, double lambda,
                                      int max_outer, double stop_tol = 1e-10) {
    return SolverConfig{DiagonalScaling::uniform(0.5 * lambda * eta, problem.op.rows()),
                        DiagonalScaling::uniform(1.0 / ((4.0 * lambda + 1.0) * eta),
                                                 problem.op.cols()),
                        1.0,
                        max_outer,
                        {},
                        stop_tol,
                        1e12,
                        false};
}

inline MoccaResult run_sim2_mocca(const Sim2Instance& inst, double eta, double lambda,
                                  int max_outer = 5000, double stop_tol = 1e-10,
                                  const IterationObserver& observer = {}) {
    const CompositeProblem problem = sim2_mocca_problem(inst, inst.base.grad_op());
    return run_mocca_basic(problem, sim2_mocca_config(problem, eta, lambda, max_outer, stop_tol),
                           {}, observer);
}

inline ApgdResult run_sim2_apgd(const Sim2Instance& inst, double eta, double lambda,
                                const ApgdInnerStop& stop, int max_outer = 5000) {
    return run_apgd(ApgdProblem{sim2_loss(inst), inst.base.grad_op(), inst.base.nu}, eta, lambda,
                    stop, {}, max_outer);
}

enum class Sim2Method { mocca, apgd };

struct Sim2Run {
    Vector x;
    IterationTrace trace;
};

inline Sim2Run run_sim2(const Sim2Instance& inst, Sim2Method method, double eta, double lambda,
                        const ApgdInnerStop& stop = {1, 0.0, 10000}, int max_outer = 5000) {
    if (method == Sim2Method::mocca) {
        auto r = run_sim2_mocca(inst, eta, lambda, max_outer);
        return {std::move(r.state.x), std::move(r.trace)};
    }
    auto r = run_sim2_apgd(inst, eta, lambda, stop, max_outer);
    return {std::move(r.x), std::move(r.trace)};
}

/// Penalty curve t -> beta*log(1 + |t|/beta) for beta in {1, 2, 10, inf}
/// (the last column is |t|), on a uniform grid over [-10, 10].
inline void write_penalty_curve_csv(const std::filesystem::path& path) {
    std::string s = "t,beta_1,beta_2,beta_10,beta_inf\n";
    for (int i = -200; i <= 200; ++i) {
        const double t = 0.05 * i;
        s += format_double(t);
        for (double beta : {1.0, 2.0, 10.0}) {
            s += ',';
            s += format_double(beta * std::log1p(std::abs(t) / beta));
        }
        s += ',';
        s += format_double(std::abs(t));
        s += '\n';
    }
    write_file_atomic(path, s);
}

inline void export_instance_csv(const Sim1Instance& inst, const std::filesystem::path& dir) {
    write_vector_csv(dir / "x_true.csv", inst.x_true);
    write_matrix_csv(dir / "A.csv", inst.a);
    write_vector_csv(dir / "b.csv", inst.b);
}

inline void export_instance_csv(const Sim2Instance& inst, const std::filesystem::path& dir) {
    export_instance_csv(inst.base, dir);
    write_matrix_csv(dir / "Z.csv", inst.z);
}

} // namespace mocca
