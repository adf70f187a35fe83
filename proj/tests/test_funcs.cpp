#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "mocca/families.hpp"
#include "mocca/functions.hpp"
#include "mocca/prox.hpp"

using namespace mocca;
using namespace mocca::testing;

TEST_CASE("weighted l1 prox") {
    const DiagonalScaling eye = DiagonalScaling::uniform(1.0, 2);
    Vector u(2);
    u << 3.0, -0.5;

    REQUIRE(prox_weighted_l1(u, eye, 0.0) == u);

    // oracle: per-coordinate scalar minimization of nu|x| + 1/2 d (x-u)^2
    const auto scalar_oracle = [](double ui, double di, double nu) {
        return grid_argmin_1d(
            [&](double x) { return nu * std::abs(x) + 0.5 * di * (x - ui) * (x - ui); }, -5.0, 5.0,
            1e-3);
    };
    const Vector got = prox_weighted_l1(u, eye, 1.0);
    REQUIRE(got[0] == 2.0);
    REQUIRE(got[1] == 0.0);
    REQUIRE(std::abs(got[0] - scalar_oracle(3.0, 1.0, 1.0)) <= 1e-3);
    REQUIRE(std::abs(got[1] - scalar_oracle(-0.5, 1.0, 1.0)) <= 1e-3);

    Vector u1(1);
    u1 << 3.0;
    const Vector got2 = prox_weighted_l1(u1, DiagonalScaling::uniform(2.0, 1), 1.0);
    REQUIRE(got2[0] == 2.5);
    REQUIRE(std::abs(got2[0] - scalar_oracle(3.0, 2.0, 1.0)) <= 1e-3);
}

TEST_CASE("tilted truncation") {
    Vector u(2);
    u << 0.5, -3.0;
    const Vector plain = truncate_tilted(u, 1.0);
    REQUIRE(plain[0] == 0.5);
    REQUIRE(plain[1] == -1.0);

    Vector c(2);
    c << 2.0, 0.0;
    REQUIRE(truncate_tilted(u, 0.0, c) == c);

    Vector u2(2);
    u2 << 4.0, -3.0;
    const Vector tilted = truncate_tilted(u2, 1.0, c);
    REQUIRE(tilted[0] == 3.0);
    REQUIRE(tilted[1] == -1.0);
}

TEST_CASE("tilted truncation satisfies the subgradient inclusion") {
    // w' = conj prox of nu||.||_1 + <., c> at u under Sigma^{-1}; then
    // w' must be a subgradient of that function at Sigma^{-1}(u - w').
    std::mt19937 eng(5);
    const double nu = 1.5;
    for (int rep = 0; rep < 20; ++rep) {
        const Vector u = random_vector(eng, 4, 3.0);
        const Vector c = random_vector(eng, 4, 1.0);
        const Vector sig = random_vector(eng, 4).cwiseAbs() + Vector::Constant(4, 0.1);
        const DiagonalScaling sigma_inv{sig};
        const Vector w = truncate_tilted(u, nu, c);
        const Vector p = sigma_inv.apply(u - w);
        for (Index i = 0; i < 4; ++i) {
            if (std::abs(p[i]) > 1e-12) {
                REQUIRE(w[i] == Catch::Approx(c[i] + nu * (p[i] > 0 ? 1.0 : -1.0)).margin(1e-12));
            } else {
                REQUIRE(std::abs(w[i] - c[i]) <= nu + 1e-12);
            }
        }
    }
}

TEST_CASE("block truncation") {
    Vector u(2);
    u << 3.0, 4.0;
    const auto one_block = BlockStructure::from_lengths({2});
    REQUIRE(truncate_blocks(u, 5.0, one_block) == u); // norm exactly 5

    Vector u2(2);
    u2 << 6.0, 8.0;
    const Vector shrunk = truncate_blocks(u2, 5.0, one_block);
    REQUIRE(shrunk[0] == Catch::Approx(3.0));
    REQUIRE(shrunk[1] == Catch::Approx(4.0));

    // singleton blocks reduce to entrywise truncation
    std::mt19937 eng(17);
    const Vector r = random_vector(eng, 6, 4.0);
    REQUIRE(truncate_blocks(r, 2.0, BlockStructure::singletons(6)) == truncate_tilted(r, 2.0));

    // zero blocks unchanged, even with nu = 0 elsewhere
    Vector z = Vector::Zero(2);
    REQUIRE(truncate_blocks(z, 0.0, one_block) == z);
}

TEST_CASE("weighted l1 ball projection") {
    const DiagonalScaling eye = DiagonalScaling::uniform(1.0, 2);
    Vector q(2);
    q << 0.25, -0.5;
    REQUIRE(project_weighted_l1_ball(q, eye, 1.0) == q); // inactive: q returned exactly

    REQUIRE(project_weighted_l1_ball(q, eye, 0.0).isZero(0.0));

    Vector q2(2);
    q2 << 3.0, 0.0;
    const Vector p = project_weighted_l1_ball(q2, eye, 1.0);
    REQUIRE(p[0] == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(p[1] == 0.0);

    // nonuniform metric against a 2d grid oracle
    Vector d_entries(2);
    d_entries << 2.0, 0.5;
    const DiagonalScaling d{d_entries};
    Vector q3(2);
    q3 << 1.4, -2.2;
    const double radius = 1.0;
    const Vector got = project_weighted_l1_ball(q3, d, radius);
    REQUIRE(got.lpNorm<1>() <= radius + 1e-9);
    const Vector oracle = grid_argmin_2d(
        [&](const Vector& x) {
            if (x.lpNorm<1>() > radius) return 1e18;
            return 0.5 * (x - q3).dot(d.apply(x - q3));
        },
        -1.5, 1.5, 1e-3);
    REQUIRE((got - oracle).lpNorm<Eigen::Infinity>() <= 2e-3);
}

TEST_CASE("log penalty functions") {
    const double beta = 3.0;
    REQUIRE(h_beta(Vector::Zero(4), beta) == 0.0);
    REQUIRE(grad_h_beta(Vector::Zero(4), beta).isZero(0.0));
    REQUIRE(logl1(Vector::Zero(4), beta) == 0.0);

    Vector wb = Vector::Constant(3, beta);
    REQUIRE(grad_h_beta(wb, beta).isApprox(Vector::Constant(3, -0.5), 1e-15));

    std::mt19937 eng(23);
    const Vector w = random_vector(eng, 5, 2.0);
    const Vector fd = fd_gradient([&](const Vector& v) { return h_beta(v, beta); }, w);
    REQUIRE((grad_h_beta(w, beta) - fd).lpNorm<Eigen::Infinity>() <= 1e-6);

    // defining identity logL1 = l1 + h_beta
    REQUIRE(logl1(w, beta) ==
            Catch::Approx(w.lpNorm<1>() + h_beta(w, beta)).epsilon(1e-14));

    Vector w2(2);
    w2 << 1.0, -2.0;
    REQUIRE(std::abs(logl1(w2, 1e8) - 3.0) <= 1e-6);
}

TEST_CASE("h_beta is concave") {
    std::mt19937 eng(29);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int rep = 0; rep < 50; ++rep) {
        const Vector w = random_vector(eng, 6, 3.0);
        const Vector wp = random_vector(eng, 6, 3.0);
        const double t = unif(eng);
        const double lhs = h_beta(t * w + (1.0 - t) * wp, 2.0);
        const double rhs = t * h_beta(w, 2.0) + (1.0 - t) * h_beta(wp, 2.0);
        REQUIRE(lhs >= rhs - 1e-12);
    }
}

TEST_CASE("errors-in-variables loss") {
    std::mt19937 eng(31);
    const Index n = 6, d = 3;
    Matrix z(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) z(i, j) = std::normal_distribution<double>()(eng);
    const Vector b = random_vector(eng, n);
    const double sigma_a = 0.4;
    const SmoothTerm loss = make_eiv_loss(z, b, sigma_a);

    REQUIRE(loss.value(Vector::Zero(d)) == 0.0);
    REQUIRE(loss.gradient(Vector::Zero(d))
                .isApprox(Vector(-(z.transpose() * b) / double(n)), 1e-14));

    const Vector x = random_vector(eng, d);
    const Vector fd = fd_gradient(loss.value, x);
    REQUIRE((loss.gradient(x) - fd).lpNorm<Eigen::Infinity>() <=
            1e-5 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));

    // sigma_a = 0 with Z = A reduces to the ordinary least-squares quadratic
    const SmoothTerm ols = make_eiv_loss(z, b, 0.0);
    const double expected =
        0.5 * x.dot((z.transpose() * z) * x) / double(n) - x.dot(z.transpose() * b) / double(n);
    REQUIRE(ols.value(x) == Catch::Approx(expected).epsilon(1e-13));
}

TEST_CASE("curvature-matched errors-in-variables prox") {
    std::mt19937 eng(37);
    const Index n = 5, d = 2;
    Matrix zm(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) zm(i, j) = std::normal_distribution<double>()(eng);
    const Vector b = random_vector(eng, n);
    const double sigma_a = 0.3;
    const DirectFamily family = eiv_curvature_direct(zm, b, sigma_a);
    const SmoothTerm loss = make_eiv_loss(zm, b, sigma_a);

    Vector t_entries(2);
    t_entries << 0.4, 0.8;
    const DiagonalScaling t{t_entries};
    const DiagonalScaling t_inv = t.inverse();

    // dense-solve oracle on a 2x2 instance
    const Vector z_pt = random_vector(eng, d);
    const Vector u = random_vector(eng, d);
    const auto gz = family.expand(z_pt);
    const Vector got = gz->prox(u, t_inv);
    const Matrix gram = (zm.transpose() * zm) / double(n);
    const Matrix m = gram + Matrix(t_inv.entries().asDiagonal());
    const Vector rhs = (zm.transpose() * b) / double(n) + sigma_a * sigma_a * z_pt +
                       t_inv.apply(u);
    REQUIRE((got - m.inverse() * rhs).lpNorm<Eigen::Infinity>() <= 1e-10);

    // residual equation (T^{-1} + Z^T Z/n)(x_t - x') = grad L(x_t) + K^T w
    const Vector x_t = random_vector(eng, d);
    const Vector ktw = random_vector(eng, d);
    const auto gz2 = family.expand(x_t);
    const Vector x_next = gz2->prox(x_t - t.apply(ktw), t_inv);
    const Vector residual = m * (x_t - x_next) - (loss.gradient(x_t) + ktw);
    REQUIRE(residual.lpNorm<Eigen::Infinity>() <= 1e-8);

    // zero step: grad L(x_t) + K^T w = 0 keeps x fixed
    const Vector ktw0 = -loss.gradient(x_t);
    const Vector fixed = gz2->prox(x_t - t.apply(ktw0), t_inv);
    REQUIRE((fixed - x_t).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("moreau route to the conjugate prox") {
    std::mt19937 eng(41);
    const Vector u = random_vector(eng, 3, 2.0);
    const Vector sig = random_vector(eng, 3).cwiseAbs() + Vector::Constant(3, 0.2);
    const DiagonalScaling sigma_inv{sig};

    // nu ||.||_1: matches the entrywise truncation to roundoff
    const WeightedL1Fn l1(1.3);
    REQUIRE((moreau_conj_prox(u, sigma_inv, l1) - truncate_tilted(u, 1.3))
                .lpNorm<Eigen::Infinity>() <= 1e-14);

    // f = 0: the conjugate is the indicator of the origin
    const ZeroFn zero;
    REQUIRE(moreau_conj_prox(u, sigma_inv, zero).lpNorm<Eigen::Infinity>() <=
            1e-15 * u.lpNorm<Eigen::Infinity>());

    // f = 1/2 ||.||^2 under Sigma = s I: closed form u/(1+s), checked on a grid
    const double s = 0.7;
    const DiagonalScaling si = DiagonalScaling::uniform(1.0 / s, 1);
    Vector u1(1);
    u1 << 1.9;
    const DenoisingQuadFn half_sq{Vector::Zero(1)};
    const Vector w = moreau_conj_prox(u1, si, half_sq);
    REQUIRE(w[0] == Catch::Approx(u1[0] / (1.0 + s)).epsilon(1e-12));
    const double grid = grid_argmin_1d(
        [&](double v) { return 0.5 * v * v + 0.5 * (v - u1[0]) * (v - u1[0]) / s; }, -4.0, 4.0,
        1e-3);
    REQUIRE(std::abs(w[0] - grid) <= 1e-3);
}

TEST_CASE("conjugate prox definition checked by grid search") {
    // f = nu||.||_1 in 2d: f* is the indicator of the box, so the conjugate
    // prox is the metric projection onto it; brute-force the definition.
    const double nu = 0.8;
    Vector u(2);
    u << 1.7, -0.3;
    Vector sig(2);
    sig << 0.5, 2.0;
    const DiagonalScaling sigma_inv{sig};
    const Vector got = BoxConjFn(nu, 2).conj_prox(u, sigma_inv);
    const Vector oracle = grid_argmin_2d(
        [&](const Vector& w) {
            if (w.lpNorm<Eigen::Infinity>() > nu) return 1e18;
            return 0.5 * (w - u).dot(sigma_inv.apply(w - u));
        },
        -1.0, 2.0, 1e-3);
    REQUIRE((got - oracle).lpNorm<Eigen::Infinity>() <= 2e-3);
}

TEST_CASE("metric prox outputs are grid minimizers") {
    std::mt19937 eng(43);
    Vector d_entries(2);
    d_entries << 1.5, 0.6;
    const DiagonalScaling d{d_entries};
    const Vector u = random_vector(eng, 2);

    const WeightedL1Fn l1(0.9);
    const Vector l1_min = grid_argmin_2d(
        [&](const Vector& x) { return l1.value(x) + 0.5 * (x - u).dot(d.apply(x - u)); }, -3.0,
        3.0, 1e-3);
    REQUIRE((l1.prox(u, d) - l1_min).lpNorm<Eigen::Infinity>() <= 2e-3);

    auto h = std::make_shared<Matrix>(2, 2);
    *h << 2.0, 0.3, 0.3, 1.0;
    Vector bvec(2);
    bvec << 0.4, -1.1;
    const QuadraticFn quad(h, bvec);
    const Vector quad_min = grid_argmin_2d(
        [&](const Vector& x) { return quad.value(x) + 0.5 * (x - u).dot(d.apply(x - u)); }, -3.0,
        3.0, 1e-3);
    REQUIRE((quad.prox(u, d) - quad_min).lpNorm<Eigen::Infinity>() <= 2e-3);
}

TEST_CASE("strongly convex nonsmooth dual function") {
    std::mt19937 eng(47);
    const Index m = 3;
    const Vector a = random_vector(eng, m);
    const Vector c = random_vector(eng, m, 0.5);
    const double alpha = 1.2, nu = 0.7;
    const QuadL1TiltConjFn fn(alpha, a, nu, c);

    // primal prox is a grid minimizer
    Vector d_entries = random_vector(eng, m).cwiseAbs() + Vector::Constant(m, 0.3);
    const DiagonalScaling d{d_entries};
    const Vector q = random_vector(eng, m, 2.0);
    const Vector got = fn.prox(q, d);
    for (Index i = 0; i < m; ++i) {
        const double gi = grid_argmin_1d(
            [&](double x) {
                return 0.5 * alpha * (x - a[i]) * (x - a[i]) + nu * std::abs(x) + c[i] * x +
                       0.5 * d[i] * (x - q[i]) * (x - q[i]);
            },
            -6.0, 6.0, 1e-3);
        REQUIRE(std::abs(got[i] - gi) <= 2e-3);
    }

    // conjugate prox satisfies the exact optimality condition
    // sigma_inv (u - w') in d f(w') is equivalent to w' in d f*(...) route
    const Vector u = random_vector(eng, m, 2.0);
    const Vector sig = random_vector(eng, m).cwiseAbs() + Vector::Constant(m, 0.2);
    const DiagonalScaling sigma_inv{sig};
    const Vector w = fn.conj_prox(u, sigma_inv);
    const Vector p = sigma_inv.apply(u - w);
    for (Index i = 0; i < m; ++i) {
        const double smooth = alpha * (p[i] - a[i]) + c[i];
        if (std::abs(p[i]) > 1e-10) {
            REQUIRE(w[i] ==
                    Catch::Approx(smooth + nu * (p[i] > 0 ? 1.0 : -1.0)).margin(1e-10));
        } else {
            REQUIRE(w[i] >= smooth - nu - 1e-10);
            REQUIRE(w[i] <= smooth + nu + 1e-10);
        }
    }

    // mirror residual vanishes at v = grad f*(w)
    REQUIRE(fn.mirror_residual(w, fn.conj_subgrad(w, Vector::Zero(m))) <= 1e-14);
}

TEST_CASE("group ball conjugate requires a blockwise-constant metric") {
    const auto blocks = BlockStructure::from_lengths({2, 1});
    const GroupBallConjFn fn(1.0, blocks);
    Vector u(3);
    u << 3.0, 4.0, 0.2;
    Vector good(3);
    good << 2.0, 2.0, 5.0;
    const Vector w = fn.conj_prox(u, DiagonalScaling{good});
    REQUIRE(w.head(2).norm() == Catch::Approx(1.0));
    Vector bad(3);
    bad << 2.0, 3.0, 5.0;
    REQUIRE_THROWS_AS(fn.conj_prox(u, DiagonalScaling{bad}), UnsupportedFunction);
}
