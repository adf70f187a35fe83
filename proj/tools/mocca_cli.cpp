// Command-line driver: runs the two penalized-regression simulations, a
// generic composite solve described by a JSON problem spec, and the built-in
// self-check suite. Exit codes: 0 success, 1 self-check/internal failure,
// 2 every sweep cell diverged, 3 configuration error.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "mocca/mocca.hpp"

using json = nlohmann::json;
using namespace mocca;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

struct OutputConfig {
    fs::path dir = "out";
    bool timing = false;
    bool gnuplot = false;
    bool penalty_curve = true;
    bool export_instance = false;
};

struct SolverSection {
    double theta = 1.0;
    int max_outer = 0; // 0: command default
    double stop_tol = 0.0;
    double divergence_guard = 1e12;
    bool opt_gap = false;
    double lambda = 1.0;
    std::string algorithm = "mocca";
    unsigned threads = 0;
};

struct RunConfig {
    std::string command;
    std::uint64_t seed = 1;
    SolverSection solver;
    OutputConfig output;
    json sweep;
    json problem;
};

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

RunConfig parse_config(const json& j, const std::string& command) {
    require_keys(j, "config", {"command", "seed", "solver", "problem", "sweep", "output"});
    RunConfig cfg;
    cfg.command = command;
    if (j.contains("command") && j["command"].get<std::string>() != command)
        throw ConfigError("config file is for command '" + j["command"].get<std::string>() +
                          "', invoked as '" + command + "'");
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("solver")) {
        const json& s = j["solver"];
        require_keys(s, "solver", {"theta", "max_outer", "stop_tol", "divergence_guard",
                                   "opt_gap", "lambda", "algorithm", "threads"});
        if (s.contains("theta")) cfg.solver.theta = s["theta"].get<double>();
        if (s.contains("max_outer")) cfg.solver.max_outer = s["max_outer"].get<int>();
        if (s.contains("stop_tol")) cfg.solver.stop_tol = s["stop_tol"].get<double>();
        if (s.contains("divergence_guard"))
            cfg.solver.divergence_guard = s["divergence_guard"].get<double>();
        if (s.contains("opt_gap")) cfg.solver.opt_gap = s["opt_gap"].get<bool>();
        if (s.contains("lambda")) cfg.solver.lambda = s["lambda"].get<double>();
        if (s.contains("algorithm")) cfg.solver.algorithm = s["algorithm"].get<std::string>();
        if (s.contains("threads")) cfg.solver.threads = s["threads"].get<unsigned>();
        if (cfg.solver.max_outer < 0) throw ConfigError("max_outer must be nonnegative");
        if (cfg.solver.theta < 0.0 || cfg.solver.theta > 1.0)
            throw ConfigError("theta must lie in [0, 1]");
    }
    if (j.contains("output")) {
        const json& o = j["output"];
        require_keys(o, "output",
                     {"dir", "timing", "gnuplot", "penalty_curve", "export_instance"});
        if (o.contains("dir")) cfg.output.dir = o["dir"].get<std::string>();
        if (o.contains("timing")) cfg.output.timing = o["timing"].get<bool>();
        if (o.contains("gnuplot")) cfg.output.gnuplot = o["gnuplot"].get<bool>();
        if (o.contains("penalty_curve")) cfg.output.penalty_curve = o["penalty_curve"].get<bool>();
        if (o.contains("export_instance"))
            cfg.output.export_instance = o["export_instance"].get<bool>();
    }
    if (j.contains("sweep")) cfg.sweep = j["sweep"];
    if (j.contains("problem")) cfg.problem = j["problem"];
    return cfg;
}

unsigned pool_size(unsigned requested, std::size_t cells) {
    unsigned n = requested;
    if (n == 0) {
        n = std::thread::hardware_concurrency();
        if (n == 0) n = 1;
    }
    if (const char* env = std::getenv("MOCCA_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(cells)));
}

/// Run one job per cell on a bounded pool; each job owns its result slot.
void run_cells(std::size_t count, unsigned threads,
               const std::function<void(std::size_t)>& job) {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            job(i);
        }
    };
    for (unsigned t = 1; t < threads; ++t) workers.emplace_back(work);
    work();
    for (auto& w : workers) w.join();
}

std::string num_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    std::string s = buf;
    for (auto& ch : s)
        if (ch == '.') ch = 'p';
    return s;
}

// ---------------------------------------------------------------------------
// sim1
// ---------------------------------------------------------------------------

int cmd_sim1(const RunConfig& cfg) {
    std::vector<double> lambdas = {4, 8, 16, 32, 64};
    std::vector<Sim1Variant> variants = {Sim1Variant::natural, Sim1Variant::split};
    if (!cfg.sweep.is_null()) {
        require_keys(cfg.sweep, "sweep", {"lambdas", "variants"});
        if (cfg.sweep.contains("lambdas"))
            lambdas = cfg.sweep["lambdas"].get<std::vector<double>>();
        if (cfg.sweep.contains("variants")) {
            variants.clear();
            for (const auto& v : cfg.sweep["variants"]) {
                const std::string name = v.get<std::string>();
                if (name == "natural")
                    variants.push_back(Sim1Variant::natural);
                else if (name == "split")
                    variants.push_back(Sim1Variant::split);
                else
                    throw ConfigError("unknown variant '" + name + "'");
            }
        }
    }
    for (double l : lambdas)
        if (!(l > 0.0)) throw ConfigError("lambda values must be positive");
    if (lambdas.empty() || variants.empty()) throw ConfigError("empty sweep");

    const int max_outer = cfg.solver.max_outer > 0 ? cfg.solver.max_outer : 20000;
    const double stop_tol = cfg.solver.stop_tol > 0.0 ? cfg.solver.stop_tol : 1e-6;

    fs::create_directories(cfg.output.dir);
    const Sim1Instance inst = gen_sim1(cfg.seed);
    if (cfg.output.export_instance) export_instance_csv(inst, cfg.output.dir);
    if (cfg.output.penalty_curve) write_penalty_curve_csv(cfg.output.dir / "penalty_curve.csv");

    struct Cell {
        Sim1Variant variant;
        double lambda;
        std::string file;
        RunStatus status = RunStatus::max_iters;
        double final_obj = 0.0, final_change = 0.0;
        std::size_t iters = 0;
    };
    std::vector<Cell> cells;
    for (const auto v : variants)
        for (const double l : lambdas)
            cells.push_back({v, l,
                             std::string("sim1_") + to_string(v) + "_lambda" + num_label(l) +
                                 ".csv"});

    run_cells(cells.size(), pool_size(cfg.solver.threads, cells.size()), [&](std::size_t i) {
        Cell& c = cells[i];
        const auto r = run_sim1(inst, c.variant, c.lambda, max_outer, stop_tol,
                                cfg.solver.opt_gap);
        write_trace_csv(cfg.output.dir / c.file, r.trace, cfg.output.timing);
        c.status = r.trace.status;
        c.iters = r.trace.records.size();
        if (!r.trace.records.empty()) {
            c.final_obj = r.trace.records.back().objective;
            c.final_change = r.trace.records.back().change;
        }
    });

    std::string summary = "variant,lambda,status,iterations,final_objective,final_change\n";
    bool any_ok = false;
    for (const auto& c : cells) {
        if (c.status != RunStatus::diverged) any_ok = true;
        summary += std::string(to_string(c.variant)) + "," + format_double(c.lambda) + "," +
                   to_string(c.status) + "," + std::to_string(c.iters) + "," +
                   format_double(c.final_obj) + "," + format_double(c.final_change) + "\n";
    }
    write_file_atomic(cfg.output.dir / "sim1_summary.csv", summary);

    if (cfg.output.gnuplot) {
        std::string gp = "set datafile separator ','\nset logscale y\n"
                         "set xlabel 'iteration'\nset ylabel 'objective'\nplot \\\n";
        for (std::size_t i = 0; i < cells.size(); ++i)
            gp += "  '" + cells[i].file + "' using 1:3 with lines title '" +
                  to_string(cells[i].variant) + " lambda=" + num_label(cells[i].lambda) +
                  (i + 1 < cells.size() ? "', \\\n" : "'\n");
        write_file_atomic(cfg.output.dir / "plot_sim1.gp", gp);
    }
    return any_ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// sim2
// ---------------------------------------------------------------------------

struct Sim2Cell {
    Sim2Method method;
    ApgdInnerStop stop; // unused for the mirrored method
    std::string rule_label;
};

int cmd_sim2(const RunConfig& cfg) {
    std::vector<double> etas = {100, 200};
    std::vector<std::string> methods = {"mocca", "apgd"};
    std::vector<json> stops = {{{"n_step", 5}}, {{"eps_thresh", 0.1}}, {{"eps_thresh", 0.05}},
                               {{"eps_thresh", 0.01}}};
    if (!cfg.sweep.is_null()) {
        require_keys(cfg.sweep, "sweep", {"eta_lambda", "methods", "inner_stops"});
        if (cfg.sweep.contains("eta_lambda"))
            etas = cfg.sweep["eta_lambda"].get<std::vector<double>>();
        if (cfg.sweep.contains("methods"))
            methods = cfg.sweep["methods"].get<std::vector<std::string>>();
        if (cfg.sweep.contains("inner_stops"))
            stops = cfg.sweep["inner_stops"].get<std::vector<json>>();
    }
    for (double e : etas)
        if (!(e > 0.0)) throw ConfigError("eta/lambda values must be positive");

    std::vector<Sim2Cell> rules;
    for (const std::string& m : methods) {
        if (m == "mocca") {
            rules.push_back({Sim2Method::mocca, {}, "mocca"});
        } else if (m == "apgd") {
            for (const json& s : stops) {
                require_keys(s, "inner_stops entry", {"n_step", "eps_thresh"});
                ApgdInnerStop stop;
                std::string label;
                if (s.contains("n_step")) {
                    stop.n_step = s["n_step"].get<int>();
                    if (stop.n_step < 1) throw ConfigError("n_step must be >= 1");
                    label = "nstep" + std::to_string(stop.n_step);
                } else if (s.contains("eps_thresh")) {
                    stop.eps_thresh = s["eps_thresh"].get<double>();
                    if (!(stop.eps_thresh > 0.0)) throw ConfigError("eps_thresh must be > 0");
                    label = "eps" + num_label(stop.eps_thresh);
                } else {
                    throw ConfigError("inner stop needs n_step or eps_thresh");
                }
                rules.push_back({Sim2Method::apgd, stop, "apgd_" + label});
            }
        } else {
            throw ConfigError("unknown method '" + m + "'");
        }
    }
    if (rules.empty() || etas.empty()) throw ConfigError("empty sweep");

    const int max_outer = cfg.solver.max_outer > 0 ? cfg.solver.max_outer : 5000;

    fs::create_directories(cfg.output.dir);
    const Sim2Instance inst = gen_sim2(cfg.seed);
    if (cfg.output.export_instance) export_instance_csv(inst, cfg.output.dir);

    struct Cell {
        Sim2Cell rule;
        double eta;
        std::string file;
        RunStatus status = RunStatus::max_iters;
        double final_obj = 0.0;
        std::size_t iters = 0;
        long long total_inner = 0;
    };
    std::vector<Cell> cells;
    for (const double e : etas)
        for (const auto& r : rules)
            cells.push_back({r, e, "sim2_" + r.rule_label + "_eta" + num_label(e) + ".csv"});

    run_cells(cells.size(), pool_size(cfg.solver.threads, cells.size()), [&](std::size_t i) {
        Cell& c = cells[i];
        const auto r = run_sim2(inst, c.rule.method, c.eta, c.eta, c.rule.stop, max_outer);
        write_trace_csv(cfg.output.dir / c.file, r.trace, cfg.output.timing);
        c.status = r.trace.status;
        c.iters = r.trace.records.size();
        if (!r.trace.records.empty()) {
            c.final_obj = r.trace.records.back().objective;
            c.total_inner = r.trace.records.back().inner;
        }
    });

    std::string summary = "method,eta,status,outer_iterations,total_inner,final_objective\n";
    bool any_ok = false;
    for (const auto& c : cells) {
        if (c.status != RunStatus::diverged) any_ok = true;
        summary += c.rule.rule_label + "," + format_double(c.eta) + "," + to_string(c.status) +
                   "," + std::to_string(c.iters) + "," + std::to_string(c.total_inner) + "," +
                   format_double(c.final_obj) + "\n";
    }
    write_file_atomic(cfg.output.dir / "sim2_summary.csv", summary);

    if (cfg.output.gnuplot) {
        std::string gp = "set datafile separator ','\n"
                         "set xlabel 'inner iterations'\nset ylabel 'objective'\nplot \\\n";
        for (std::size_t i = 0; i < cells.size(); ++i)
            gp += "  '" + cells[i].file + "' using 2:3 with lines title '" +
                  cells[i].rule.rule_label + " eta=" + num_label(cells[i].eta) +
                  (i + 1 < cells.size() ? "', \\\n" : "'\n");
        write_file_atomic(cfg.output.dir / "plot_sim2.gp", gp);
    }
    return any_ok ? 0 : 2;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

LinearOperator build_operator(const json& spec, const fs::path& base_dir) {
    require_keys(spec, "problem.k", {"kind", "p", "d1", "d2", "dim", "path"});
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "diff1d") return make_diff_1d(spec.at("p").get<Index>());
    if (kind == "diff2d") return make_diff_2d(spec.at("d1").get<Index>(), spec.at("d2").get<Index>());
    if (kind == "identity") return LinearOperator::identity(spec.at("dim").get<Index>());
    if (kind == "csv") {
        fs::path p = spec.at("path").get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        return LinearOperator::dense(load_matrix_csv(p));
    }
    throw ConfigError("unknown operator kind '" + kind + "'");
}

Vector load_inline_or_csv(const json& spec, const fs::path& base_dir) {
    if (spec.is_array()) {
        Vector v(static_cast<Index>(spec.size()));
        for (Index i = 0; i < v.size(); ++i) v[i] = spec[static_cast<std::size_t>(i)].get<double>();
        return v;
    }
    fs::path p = spec.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return load_vector_csv(p);
}

int cmd_solve(const RunConfig& cfg, const fs::path& config_dir) {
    if (cfg.problem.is_null()) throw ConfigError("solve needs a problem section");
    require_keys(cfg.problem, "problem", {"k", "penalty", "loss"});
    const LinearOperator k = build_operator(cfg.problem.at("k"), config_dir);
    const Index d = k.cols(), m = k.rows();

    // loss -> direct family
    const json& loss_spec = cfg.problem.at("loss");
    require_keys(loss_spec, "problem.loss",
                 {"name", "data", "z_path", "b_path", "sigma_a", "normalized", "curvature",
                  "radius"});
    const std::string loss_name = loss_spec.at("name").get<std::string>();
    DirectFamily loss_fam;
    if (loss_name == "quadratic") {
        Vector data = load_inline_or_csv(loss_spec.at("data"), config_dir);
        const Index dim = data.size();
        loss_fam = trivial_direct(std::make_shared<DenoisingQuadFn>(std::move(data)), dim);
    } else if (loss_name == "eiv") {
        fs::path zp = loss_spec.at("z_path").get<std::string>();
        fs::path bp = loss_spec.at("b_path").get<std::string>();
        if (zp.is_relative()) zp = config_dir / zp;
        if (bp.is_relative()) bp = config_dir / bp;
        const Matrix z = load_matrix_csv(zp);
        const Vector b = load_vector_csv(bp);
        const double sigma_a = loss_spec.at("sigma_a").get<double>();
        const bool normalized = loss_spec.value("normalized", true);
        const double radius = loss_spec.value("radius", kInf);
        if (loss_spec.value("curvature", true))
            loss_fam = eiv_curvature_direct(z, b, sigma_a, normalized, radius);
        else if (radius < kInf)
            loss_fam = DirectFamily{
                [term = make_eiv_loss(z, b, sigma_a, normalized), radius](const Vector& x) {
                    return x.lpNorm<1>() > radius ? kInf : term.value(x);
                },
                [term = make_eiv_loss(z, b, sigma_a, normalized), radius,
                 dd = z.cols()](const Vector& zp2) -> MetricProxPtr {
                    Vector grad = term.gradient(zp2);
                    const double c0 = term.value(zp2) - grad.dot(zp2);
                    return std::make_shared<ConstrainedLinearFn>(std::move(grad), radius, c0);
                },
                z.cols()};
        else
            loss_fam = linearized_direct(std::make_shared<ZeroFn>(),
                                         make_eiv_loss(z, b, sigma_a, normalized));
    } else {
        throw ConfigError("unknown loss '" + loss_name + "'");
    }
    if (loss_fam.dim != d)
        throw ConfigError("loss dimension " + std::to_string(loss_fam.dim) +
                          " does not match operator columns " + std::to_string(d));

    // penalty -> transformed family (or full problem for the log penalty)
    const json& pen_spec = cfg.problem.at("penalty");
    require_keys(pen_spec, "problem.penalty", {"name", "nu", "beta", "form", "block_lengths"});
    const std::string pen_name = pen_spec.at("name").get<std::string>();
    const double nu = pen_spec.value("nu", 1.0);
    if (nu < 0.0) throw ConfigError("nu must be nonnegative");

    CompositeProblem problem = [&]() -> CompositeProblem {
        if (pen_name == "l1")
            return {trivial_transformed(std::make_shared<BoxConjFn>(nu, m), m),
                    std::move(loss_fam), k};
        if (pen_name == "group_l1") {
            const auto lengths = pen_spec.at("block_lengths").get<std::vector<Index>>();
            auto blocks = BlockStructure::from_lengths(lengths);
            if (blocks.total() != m)
                throw ConfigError("block lengths sum to " + std::to_string(blocks.total()) +
                                  ", operator has " + std::to_string(m) + " rows");
            return {trivial_transformed(
                        std::make_shared<GroupBallConjFn>(nu, std::move(blocks)), m),
                    std::move(loss_fam), k};
        }
        if (pen_name == "logl1") {
            const double beta = pen_spec.at("beta").get<double>();
            if (!(beta > 0.0)) throw ConfigError("beta must be positive");
            const std::string form = pen_spec.value("form", "natural");
            if (form == "natural") return make_logtv_natural(nu, beta, k, std::move(loss_fam));
            if (form == "split") return make_logtv_split(nu, beta, k, std::move(loss_fam));
            throw ConfigError("unknown form '" + form + "'");
        }
        throw ConfigError("unknown penalty '" + pen_name + "'");
    }();
    try {
        validate_dims(problem);
    } catch (const InvalidDimension& e) {
        throw ConfigError(e.what());
    }

    const int max_outer = cfg.solver.max_outer > 0 ? cfg.solver.max_outer : 10000;
    const double stop_tol = cfg.solver.stop_tol > 0.0 ? cfg.solver.stop_tol : 1e-10;
    const auto [sigma, t] = make_preconditioners(problem.op, cfg.solver.lambda);
    SolverConfig scfg{sigma,       t,       cfg.solver.theta,
                      max_outer,   {},      stop_tol,
                      cfg.solver.divergence_guard, cfg.solver.opt_gap};

    fs::create_directories(cfg.output.dir);
    IterationTrace trace;
    Vector x_final;
    if (cfg.solver.algorithm == "mocca") {
        auto r = run_mocca_basic(problem, scfg);
        trace = std::move(r.trace);
        x_final = std::move(r.state.x);
    } else if (cfg.solver.algorithm == "cp") {
        auto r = run_cp(problem, scfg);
        trace = std::move(r.trace);
        x_final = std::move(r.state.x);
    } else if (cfg.solver.algorithm == "admm") {
        auto r = run_admm(problem, scfg);
        trace = std::move(r.trace);
        x_final = std::move(r.state.x);
    } else {
        throw ConfigError("unknown algorithm '" + cfg.solver.algorithm + "'");
    }
    write_trace_csv(cfg.output.dir / "trace.csv", trace, cfg.output.timing);
    write_vector_csv(cfg.output.dir / "x_final.csv", x_final);
    for (const auto& w : trace.warnings) std::cerr << "warning: " << w << "\n";
    return trace.status == RunStatus::diverged ? 2 : 0;
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool passed;
};

int cmd_check(const std::string& inject) {
    std::vector<CheckResult> results;
    const bool flip = inject == "adjoint-sign-flip";
    if (!inject.empty() && !flip) throw ConfigError("unknown injection '" + inject + "'");

    const auto adjoint_check = [&](const std::string& name, const LinearOperator& k,
                                   bool flip_this) {
        std::mt19937 eng(12345);
        std::normal_distribution<double> dist;
        bool ok = true;
        for (int rep = 0; rep < 5; ++rep) {
            Vector x(k.cols()), w(k.rows());
            for (Index i = 0; i < x.size(); ++i) x[i] = dist(eng);
            for (Index i = 0; i < w.size(); ++i) w[i] = dist(eng);
            Vector adj = k.adjoint_apply(w);
            if (flip_this) adj = -adj; // simulated implementation defect
            const double lhs = k.apply(x).dot(w);
            const double rhs = x.dot(adj);
            if (std::abs(lhs - rhs) > 1e-12 * std::max({std::abs(lhs), std::abs(rhs), 1.0}))
                ok = false;
        }
        results.push_back({name, ok});
    };

    adjoint_check("adjoint_diff1d", make_diff_1d(9), flip);
    adjoint_check("adjoint_diff2d", make_diff_2d(5, 6), false);
    {
        std::mt19937 eng(999);
        Matrix a(4, 7);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = std::normal_distribution<double>()(eng);
        adjoint_check("adjoint_dense", LinearOperator::dense(a), false);
        adjoint_check("adjoint_stack",
                      stack_operators({make_diff_1d(7), LinearOperator::identity(7)}).first,
                      false);
    }
    {
        bool ok = true;
        for (double lambda : {1.0, 4.0}) {
            const auto k = make_diff_2d(6, 5);
            const auto [sigma, t] = make_preconditioners(k, lambda);
            if (op_norm_estimate(sigma, k, t).value > 1.0 + 1e-8) ok = false;
        }
        results.push_back({"preconditioner_norm", ok});
    }
    {
        const auto k = make_diff_1d(3);
        const auto [sigma, t] = make_preconditioners(k, 1.0);
        results.push_back({"assumption1_small", check_assumption1(sigma, t, k).satisfied});
    }
    {
        std::mt19937 eng(777);
        std::normal_distribution<double> dist;
        Vector u(4), sig(4);
        for (Index i = 0; i < 4; ++i) {
            u[i] = 3.0 * dist(eng);
            sig[i] = std::abs(dist(eng)) + 0.2;
        }
        const DiagonalScaling sigma_inv{sig};
        const Vector a = moreau_conj_prox(u, sigma_inv, WeightedL1Fn(0.9));
        const Vector b = truncate_tilted(u, 0.9);
        results.push_back({"moreau_l1", (a - b).lpNorm<Eigen::Infinity>() <= 1e-12});

        const DiagonalScaling si = DiagonalScaling::uniform(2.0, 1);
        Vector u1(1);
        u1 << 1.7;
        const Vector w = moreau_conj_prox(u1, si, DenoisingQuadFn{Vector::Zero(1)});
        results.push_back({"moreau_quadratic", std::abs(w[0] - u1[0] / 1.5) <= 1e-12});
    }
    {
        // tiny denoising instance: the mirrored algorithm with trivial
        // families must equal the plain primal-dual loop step for step
        std::mt19937 eng(555);
        std::normal_distribution<double> dist;
        Vector b(6);
        for (Index i = 0; i < 6; ++i) b[i] = 2.0 * dist(eng);
        const auto k = make_diff_1d(6);
        CompositeProblem p{trivial_transformed(std::make_shared<BoxConjFn>(0.7, k.rows()),
                                               k.rows()),
                           trivial_direct(std::make_shared<DenoisingQuadFn>(b), 6), k};
        const auto [sigma, t] = make_preconditioners(k, 1.0);
        SolverConfig cfg{sigma, t, 1.0, 30, {}, 1e-30, 1e12, false};
        std::vector<Vector> mocca_x, cp_x;
        run_mocca_basic(p, cfg, {}, [&](const IterationView& v) { mocca_x.push_back(v.x); });
        run_cp(p, cfg, {}, [&](const CpStepView& v) { cp_x.push_back(v.x); });
        double dev = 0.0;
        for (std::size_t i = 0; i < std::min(mocca_x.size(), cp_x.size()); ++i)
            dev = std::max(dev, (mocca_x[i] - cp_x[i]).lpNorm<Eigen::Infinity>());
        results.push_back({"reduction_cp", dev <= 1e-12});
    }
    {
        // no transformed term: proximal gradient reduction
        std::mt19937 eng(333);
        std::normal_distribution<double> dist;
        Matrix a(8, 4);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = dist(eng);
        Vector y(8);
        for (Index i = 0; i < 8; ++i) y[i] = dist(eng);
        auto h_mat = std::make_shared<Matrix>(a.transpose() * a);
        auto q = std::make_shared<Vector>(a.transpose() * y);
        const SmoothTerm h{[=](const Vector& x) { return 0.5 * x.dot(*h_mat * x) - q->dot(x); },
                           [=](const Vector& x) { return Vector(*h_mat * x - *q); }, 4};
        const auto g = std::make_shared<WeightedL1Fn>(0.3);
        const double tau = 1.0 / 64.0;
        CompositeProblem p{trivial_transformed(std::make_shared<ZeroConjFn>(), 1),
                           linearized_direct(g, h), LinearOperator::zero(1, 4)};
        SolverConfig cfg{DiagonalScaling::uniform(1.0, 1), DiagonalScaling::uniform(tau, 4),
                         1.0, 50, {}, 1e-30, 1e12, false};
        std::vector<Vector> mocca_x;
        run_mocca_basic(p, cfg, {}, [&](const IterationView& v) { mocca_x.push_back(v.x); });
        Vector x = Vector::Zero(4);
        double dev = 0.0;
        for (std::size_t i = 0; i < mocca_x.size(); ++i) {
            x = g->prox(x - tau * h.gradient(x), DiagonalScaling::uniform(1.0 / tau, 4));
            dev = std::max(dev, (x - mocca_x[i]).lpNorm<Eigen::Infinity>());
        }
        results.push_back({"reduction_prox_grad", dev <= 1e-12});
    }
    {
        // split-variable correspondence and mirror inclusion on a small
        // nonconvex log-penalty instance
        std::mt19937 eng(111);
        std::normal_distribution<double> dist;
        Matrix a(9, 6);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = dist(eng);
        Vector y(9);
        for (Index i = 0; i < 9; ++i) y[i] = 2.0 * dist(eng);
        const auto k = make_diff_1d(6);
        const CompositeProblem p = make_logtv_natural(
            1.2, 2.0, k, trivial_direct(QuadraticFn::least_squares(a, y), 6));
        const double lambda = 4.0;
        SolverConfig cfg{DiagonalScaling::uniform(0.5 * lambda, k.rows()),
                         DiagonalScaling::uniform(0.25 / lambda, 6), 1.0, 50, {}, 1e-30, 1e12,
                         false};
        std::vector<Vector> mocca_w;
        double mirror_dev = 0.0;
        run_mocca_basic(p, cfg, {}, [&](const IterationView& v) {
            mocca_w.push_back(v.w);
            mirror_dev = std::max(mirror_dev,
                                  p.transformed.expand(v.v)->mirror_residual(v.w, v.v_next));
        });
        std::vector<Vector> admm_w;
        run_admm(p, cfg, {}, [&](const AdmmStepView& v) { admm_w.push_back(v.w_equiv); });
        double dev = 0.0;
        for (std::size_t i = 0; i < std::min(mocca_w.size(), admm_w.size()); ++i)
            dev = std::max(dev, (mocca_w[i] - admm_w[i]).lpNorm<Eigen::Infinity>());
        results.push_back({"admm_correspondence", dev <= 1e-10});
        results.push_back({"mirror_inclusion", mirror_dev <= 1e-8});
    }

    bool all = true;
    for (const auto& r : results) {
        std::cout << "check " << r.name << ": " << (r.passed ? "PASS" : "FAIL") << "\n";
        if (!r.passed) all = false;
    }
    std::cout << (all ? "all checks passed" : "some checks FAILED") << "\n";
    return all ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"first-order composite optimization toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, inject;
    std::uint64_t seed = 0;
    bool seed_set = false, out_set = false;

    const auto add_common = [&](CLI::App* sub, bool with_inject = false) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--seed", seed, "instance seed (overrides the config)")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--out", out_dir, "output directory (overrides the config)")
            ->each([&](const std::string&) { out_set = true; });
        if (with_inject)
            sub->add_option("--inject", inject, "test mode: inject a named defect");
    };
    add_common(app.add_subcommand("sim1", "nonconvex total-variation simulation sweep"));
    add_common(app.add_subcommand("sim2", "errors-in-variables simulation sweep"));
    add_common(app.add_subcommand("solve", "solve a composite problem from a spec file"));
    add_common(app.add_subcommand("check", "run the built-in self checks"), true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 3 : 0;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        json j = json::object();
        fs::path config_dir = fs::current_path();
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ConfigError("cannot open config file " + config_path);
            in >> j;
            config_dir = fs::absolute(config_path).parent_path();
        }
        RunConfig cfg = parse_config(j, command);
        if (seed_set) cfg.seed = seed;
        if (out_set) cfg.output.dir = out_dir;

        if (command == "sim1") return cmd_sim1(cfg);
        if (command == "sim2") return cmd_sim2(cfg);
        if (command == "solve") return cmd_solve(cfg, config_dir);
        return cmd_check(inject);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const InvalidDimension& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const UnsupportedFunction& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const UnsupportedSize& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
