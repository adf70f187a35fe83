#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "mocca/experiments.hpp"

using namespace mocca;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("first simulation instance") {
    const Sim1Instance inst = gen_sim1(1);
    REQUIRE(inst.dim() == 625);
    REQUIRE(inst.n == 200);
    REQUIRE(inst.grad_op().rows() == 1200);
    REQUIRE(inst.a.rows() == 200);
    REQUIRE(inst.a.cols() == 625);
    REQUIRE(inst.b.size() == 200);

    // 5x5 + 15x15 + 5x5 blocks of ones
    REQUIRE(inst.x_true.sum() == 275.0);

    // regression constant: nonzeros in the 2d differences of the true image,
    // computed once by direct evaluation and frozen
    const Vector g = inst.grad_op().apply(inst.x_true);
    int nnz = 0;
    for (Index i = 0; i < g.size(); ++i)
        if (g[i] != 0.0) ++nnz;
    REQUIRE(nnz == 80);
}

TEST_CASE("instances replay byte-identically for a fixed seed") {
    const Sim1Instance a = gen_sim1(7);
    const Sim1Instance b = gen_sim1(7);
    REQUIRE(a.a == b.a);
    REQUIRE(a.b == b.b);

    const auto dir = std::filesystem::temp_directory_path() / "mocca_experiments_test";
    std::filesystem::create_directories(dir);
    export_instance_csv(a, dir);
    const std::string first = read_file(dir / "A.csv");
    export_instance_csv(b, dir);
    REQUIRE(read_file(dir / "A.csv") == first);
    std::filesystem::remove_all(dir);

    REQUIRE(gen_sim1(8).a != a.a);
}

TEST_CASE("errors-in-variables extension") {
    const Sim2Instance inst = gen_sim2(1);
    REQUIRE(inst.z.rows() == 200);
    REQUIRE(inst.z.cols() == 625);

    // shares the base draws with the plain instance at the same seed
    const Sim1Instance base = gen_sim1(1);
    REQUIRE(inst.base.a == base.a);
    REQUIRE(inst.base.b == base.b);

    // noise scale consistent with sigma_a across seeds
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const Sim2Instance s = gen_sim2(seed);
        const double scale = (s.z - s.base.a).norm() / std::sqrt(200.0 * 625.0);
        REQUIRE(scale >= 0.15);
        REQUIRE(scale <= 0.25);
    }

    // objective value at zero vanishes
    const SmoothTerm loss = sim2_loss(inst);
    REQUIRE(loss.value(Vector::Zero(625)) == 0.0);

    // the debiased Gram matrix has a strongly concave direction when n < d
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Matrix>(*inst.gram, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    REQUIRE(min_eig < 0.0);

    // zero measurement noise reproduces the design matrix exactly
    const Sim2Instance clean = gen_sim2(1, 0.0);
    REQUIRE(clean.z == clean.base.a);
}

TEST_CASE("operator application budget per iteration") {
    const Sim1Instance inst = gen_sim1(3);
    const int iters = 6;

    // natural arrangement: one forward and one adjoint application per
    // iteration (the extrapolated image comes from linearity, the expansion
    // reuses it), plus one forward application at initialization
    {
        auto counter = std::make_shared<ApplyCounter>();
        const CompositeProblem p =
            sim1_problem(inst, Sim1Variant::natural, counted(inst.grad_op(), counter));
        run_mocca_basic(p, sim1_config(p, 64.0, iters, 1e-30));
        REQUIRE(counter->applies.load() == iters + 1);
        REQUIRE(counter->adjoints.load() == iters);
    }

    // split arrangement: the expansion applies the operator to the new point
    // and its gradient image, adding one forward and one adjoint application
    {
        auto counter = std::make_shared<ApplyCounter>();
        const CompositeProblem p =
            sim1_problem(inst, Sim1Variant::split, counted(inst.grad_op(), counter));
        run_mocca_basic(p, sim1_config(p, 64.0, iters, 1e-30));
        REQUIRE(counter->applies.load() == 2 * iters + 2);
        REQUIRE(counter->adjoints.load() == 2 * iters + 1);
    }

    // second simulation: same budget as the natural arrangement
    {
        const Sim2Instance s2 = gen_sim2(3);
        auto counter = std::make_shared<ApplyCounter>();
        const CompositeProblem p = sim2_mocca_problem(s2, counted(s2.base.grad_op(), counter));
        run_mocca_basic(p, sim2_mocca_config(p, 100.0, 100.0, iters));
        REQUIRE(counter->applies.load() == iters + 1);
        REQUIRE(counter->adjoints.load() == iters);
    }
}

TEST_CASE("short simulation runs produce well-formed traces") {
    const Sim1Instance inst = gen_sim1(2);
    const auto r = run_sim1(inst, Sim1Variant::natural, 64.0, 25);
    REQUIRE(r.trace.status == RunStatus::max_iters);
    REQUIRE(r.trace.records.size() == 25);
    for (std::size_t i = 0; i < r.trace.records.size(); ++i) {
        REQUIRE(r.trace.records[i].outer == static_cast<int>(i + 1));
        REQUIRE(std::isfinite(r.trace.records[i].objective));
    }

    // objective at the zero start is 1/2||b||^2
    const CompositeProblem p = sim1_problem(inst, Sim1Variant::natural);
    REQUIRE(p.objective(Vector::Zero(625)) ==
            Catch::Approx(0.5 * inst.b.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("one-step inner loop equivalence holds on the generated instance") {
    const Sim2Instance inst = gen_sim2(1);
    const double eta = 100.0, lambda = 100.0;
    const int iters = 40;

    std::vector<Vector> mocca_x;
    run_sim2_mocca(inst, eta, lambda, iters, 1e-30,
                   [&](const IterationView& v) { mocca_x.push_back(v.x); });

    Vector x = Vector::Zero(625), u = Vector::Zero(1200);
    const ApgdProblem ap{sim2_loss(inst), inst.base.grad_op(), inst.base.nu};
    double max_dev = 0.0;
    for (int t = 0; t < iters; ++t) {
        const auto step = run_apgd(ap, eta, lambda, ApgdInnerStop{1, 0.0, 10}, {x, u}, 1);
        x = step.x;
        u = step.u;
        max_dev = std::max(max_dev, (x - mocca_x[static_cast<std::size_t>(t)])
                                        .lpNorm<Eigen::Infinity>());
    }
    REQUIRE(max_dev <= 1e-10);
}

TEST_CASE("penalty curve export") {
    const auto dir = std::filesystem::temp_directory_path() / "mocca_curve_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "penalty_curve.csv";
    write_penalty_curve_csv(path);
    const Matrix m = [&] {
        std::ifstream in(path);
        std::string header;
        std::getline(in, header);
        REQUIRE(header == "t,beta_1,beta_2,beta_10,beta_inf");
        std::string rest((std::istreambuf_iterator<char>(in)), {});
        const auto tmp = dir / "body.csv";
        std::ofstream out(tmp);
        out << rest;
        out.close();
        return load_matrix_csv(tmp);
    }();
    REQUIRE(m.rows() == 401);
    REQUIRE(m.cols() == 5);
    for (Index i = 0; i < m.rows(); ++i) {
        REQUIRE(m(i, 4) == std::abs(m(i, 0)));             // beta = inf column
        REQUIRE(m(i, 1) <= m(i, 2) + 1e-12);               // smaller beta, smaller value
        REQUIRE(m(i, 3) <= std::abs(m(i, 0)) + 1e-12);     // log curve below absolute value
    }
    std::filesystem::remove_all(dir);
}
