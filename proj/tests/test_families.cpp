#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "mocca/families.hpp"

using namespace mocca;
using namespace mocca::testing;

namespace {

struct TinyInstance {
    Matrix a;
    Vector b;
    LinearOperator k = make_diff_1d(4);
    double nu = 1.5;
    double beta = 2.0;

    TinyInstance() {
        std::mt19937 eng(57);
        a.resize(5, 4);
        for (Index i = 0; i < a.rows(); ++i)
            for (Index j = 0; j < a.cols(); ++j) a(i, j) = std::normal_distribution<double>()(eng);
        b = random_vector(eng, 5);
    }

    DirectFamily loss_family() const {
        return trivial_direct(QuadraticFn::least_squares(a, b), 4);
    }
};

/// abs max of the finite-difference gradient of (base - approximation) at the
/// expansion point; the approximation contract requires it to vanish.
double first_order_gap(const std::function<double(const Vector&)>& base,
                       const std::function<double(const Vector&)>& approx, const Vector& at) {
    const Vector g = fd_gradient([&](const Vector& p) { return base(p) - approx(p); }, at);
    return g.lpNorm<Eigen::Infinity>();
}

} // namespace

TEST_CASE("log penalty family is first-order accurate at the expansion point") {
    const TinyInstance inst;
    const auto family = logl1_transformed(inst.nu, inst.beta, 3);
    std::mt19937 eng(61);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector v = random_vector(eng, 3, 2.0);
        const auto fv = family.expand(v);
        REQUIRE(first_order_gap(family.base_value,
                                [&](const Vector& w) { return fv->value(w); }, v) <= 1e-6);

        // tight at the expansion point: F_v(v) = nu * logL1(v)
        REQUIRE(fv->value(v) == Catch::Approx(inst.nu * logl1(v, inst.beta)).epsilon(1e-12));
    }
}

TEST_CASE("split direct family is first-order accurate at the expansion point") {
    const TinyInstance inst;
    const CompositeProblem split =
        make_logtv_split(inst.nu, inst.beta, inst.k, inst.loss_family());
    std::mt19937 eng(67);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector z = random_vector(eng, 4, 2.0);
        const auto gz = split.direct.expand(z);
        REQUIRE(first_order_gap(split.direct.base_value,
                                [&](const Vector& x) { return gz->value(x); }, z) <= 1e-6);
    }
}

TEST_CASE("both penalty arrangements give the same objective") {
    const TinyInstance inst;
    const CompositeProblem natural =
        make_logtv_natural(inst.nu, inst.beta, inst.k, inst.loss_family());
    const CompositeProblem split =
        make_logtv_split(inst.nu, inst.beta, inst.k, inst.loss_family());
    std::mt19937 eng(71);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector x = random_vector(eng, 4, 3.0);
        const double on = natural.objective(x);
        const double os = split.objective(x);
        REQUIRE(on == Catch::Approx(os).epsilon(1e-13));
    }
}

TEST_CASE("natural family conjugate prox matches the tilted truncation form") {
    const TinyInstance inst;
    const auto family = logl1_transformed(inst.nu, inst.beta, 3);
    std::mt19937 eng(73);
    const Vector v = random_vector(eng, 3, 2.0);
    const Vector u = random_vector(eng, 3, 4.0);
    const auto fv = family.expand(v);
    const Vector tilt = inst.nu * grad_h_beta(v, inst.beta);
    const Vector expected = truncate_tilted(u - tilt, inst.nu) + tilt;
    REQUIRE((fv->conj_prox(u, DiagonalScaling::uniform(1.0, 3)) - expected)
                .lpNorm<Eigen::Infinity>() <= 1e-14);
}

TEST_CASE("linearized convex-plus-smooth family") {
    std::mt19937 eng(79);
    auto h_quad = std::make_shared<Matrix>(3, 3);
    *h_quad << 2.0, 0.1, 0.0, 0.1, 1.5, -0.2, 0.0, -0.2, 1.0;
    const Vector q = random_vector(eng, 3);
    SmoothTerm h{[=](const Vector& x) { return 0.5 * x.dot(*h_quad * x) - q.dot(x); },
                 [=](const Vector& x) { return Vector(*h_quad * x - q); }, 3};
    const DirectFamily fam = linearized_direct(std::make_shared<WeightedL1Fn>(0.4), h);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector z = random_vector(eng, 3, 2.0);
        const auto gz = fam.expand(z);
        REQUIRE(first_order_gap(fam.base_value,
                                [&](const Vector& x) { return gz->value(x); }, z) <= 1e-6);
    }
}

TEST_CASE("curvature-matched eiv family") {
    std::mt19937 eng(83);
    Matrix zm(6, 3);
    for (Index i = 0; i < zm.rows(); ++i)
        for (Index j = 0; j < zm.cols(); ++j) zm(i, j) = std::normal_distribution<double>()(eng);
    const Vector b = random_vector(eng, 6);
    const DirectFamily fam = eiv_curvature_direct(zm, b, 0.35);
    for (int rep = 0; rep < 10; ++rep) {
        const Vector z = random_vector(eng, 3, 2.0);
        const auto gz = fam.expand(z);
        REQUIRE(first_order_gap(fam.base_value,
                                [&](const Vector& x) { return gz->value(x); }, z) <= 1e-6);
    }
}

TEST_CASE("objective reports the infinity sentinel off-domain") {
    const Vector c = Vector::Zero(3);
    CompositeProblem p{
        trivial_transformed(std::make_shared<BoxConjFn>(1.0, 2), 2),
        trivial_direct(std::make_shared<ConstrainedLinearFn>(c, 1.0), 3),
        make_diff_1d(3)};
    Vector inside(3);
    inside << 0.2, -0.3, 0.1;
    REQUIRE(std::isfinite(p.objective(inside)));
    Vector outside(3);
    outside << 2.0, 0.0, 0.0;
    REQUIRE(p.objective(outside) == kInf);
}

TEST_CASE("dimension validation") {
    CompositeProblem bad{trivial_transformed(std::make_shared<BoxConjFn>(1.0, 5), 5),
                         trivial_direct(std::make_shared<ZeroFn>(), 3), make_diff_1d(3)};
    REQUIRE_THROWS_AS(validate_dims(bad), InvalidDimension);
}
