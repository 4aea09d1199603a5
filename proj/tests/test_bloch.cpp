#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hcs/bloch.hpp"
#include "hcs/errors.hpp"
#include "support.hpp"

using namespace hcs;
using hcs::testing::inclusion;
using hcs::testing::single_fiber;

TEST_CASE("inclusion eigenvalues match the separable box oracle") {
    const auto geom = build_geometry(inclusion());
    const Grid grid = classify_nodes(geom, 16);
    const double h = grid.h();
    // 8 soft nodes per axis, zero value half a spacing beyond the end nodes
    std::vector<double> oracle;
    for (int a = 1; a <= 4; ++a)
        for (int b = 1; b <= 4; ++b)
            for (int c = 1; c <= 4; ++c) {
                double s = 0.0;
                for (int k : {a, b, c}) s += 4.0 / (h * h) * std::pow(std::sin(M_PI * k * h), 2);
                oracle.push_back(s);
            }
    std::sort(oracle.begin(), oracle.end());
    const auto b = bloch_eigs(geom, grid, QuasiMomentum{}, 10);
    for (int m = 0; m < 10; ++m) CHECK(b.mu[m] == doctest::Approx(oracle[m]).epsilon(1e-9));
}

TEST_CASE("inclusion spectrum is theta independent") {
    const auto geom = build_geometry(inclusion());
    const Grid grid = classify_nodes(geom, 12);
    const auto a = bloch_eigs(geom, grid, QuasiMomentum({1.0, 0.5, 2.0}), 6);
    const auto b = bloch_eigs(geom, grid, QuasiMomentum({M_PI, M_PI, 0.1}), 6);
    const auto c = bloch_eigs(geom, grid, QuasiMomentum{}, 6);
    for (int m = 0; m < 6; ++m) {
        CHECK(std::abs(a.mu[m] - b.mu[m]) <= 1e-12);
        CHECK(std::abs(a.mu[m] - c.mu[m]) <= 1e-12);
    }
}

TEST_CASE("eigenvectors are L2 orthonormal with small residuals") {
    const auto geom = build_geometry(single_fiber(0, {{0.3, 0.3}, {0.7, 0.7}}));
    const Grid grid = classify_nodes(geom, 10);
    const auto b = bloch_eigs(geom, grid, QuasiMomentum({0.0, 1.5, 0.0}), 8);
    const double h3 = std::pow(grid.h(), 3);
    const Eigen::MatrixXcd g = h3 * b.vectors.adjoint() * b.vectors;
    CHECK((g - Eigen::MatrixXcd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::is_sorted(b.mu.begin(), b.mu.end()));
    for (double r : b.residuals) CHECK(r <= 1e-8);
    CHECK(b.mu[0] > 0.0);
}

TEST_CASE("theta grid layout") {
    const auto geom = build_geometry(single_fiber(1));
    const auto t4 = make_theta_grid(4, geom);
    CHECK(t4.points.size() == 64u);
    CHECK(std::is_sorted(t4.points.begin(), t4.points.end()));
    CHECK(t4.points.front() == QuasiMomentum{});
    const auto t1 = make_theta_grid(1, geom);
    REQUIRE(t1.points.size() == 2u);
    CHECK(t1.points[1].theta == std::array<double, 3>{M_PI, 0.0, M_PI});
    CHECK_THROWS_AS(make_theta_grid(0, geom), ValidationError);
}

TEST_CASE("sweep is reproducible across thread counts") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid grid = classify_nodes(geom, 8);
    const auto tg = make_theta_grid(2, geom);
    BlochOptions one, many;
    many.threads = 4;
    const auto a = theta_sweep(geom, grid, tg, 4, one);
    const auto b = theta_sweep(geom, grid, tg, 4, many);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].theta == tg.points[i]);
        CHECK(a[i].mu == b[i].mu);
        CHECK((a[i].vectors - b[i].vectors).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("sweep failures are aggregated") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid grid = classify_nodes(geom, 8);
    const auto tg = make_theta_grid(2, geom);
    BlochOptions opt;
    opt.eigen.tol = 1e-300;
    opt.eigen.dense_threshold = 0;
    opt.eigen.dense_fallback_limit = 0;
    opt.eigen.max_restarts = 1;
    try {
        theta_sweep(geom, grid, tg, 3, opt);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("theta=(0,0,0)") != std::string::npos);
        CHECK(msg.find("theta=(3.14159") != std::string::npos);
    }
}

TEST_CASE("Lipschitz bound and Dirichlet domination") {
    const auto geom = build_geometry(single_fiber(0, {{0.3, 0.3}, {0.7, 0.7}}, 1.0, 1.0));
    const Grid grid = classify_nodes(geom, 8);
    const auto tg = make_theta_grid(4, geom);
    const auto sweep = theta_sweep(geom, grid, tg, 6);
    const SoftPhase soft(geom, grid);
    CHECK(lipschitz_violations(tg, sweep, soft.a0_max, 5, 10.0 * grid.h() * grid.h()).empty());
    const auto mu = dirichlet_baseline(geom, grid, 6);
    CHECK(domination_excess(sweep, mu) <= 1e-8);
    // the baseline dominates strictly on this geometry
    CHECK(domination_excess(sweep, mu) < 0.0);
}

TEST_CASE("empty soft phase") {
    auto cfg = single_fiber(0, {{0.01, 0.01}, {0.99, 0.99}});
    const auto geom = build_geometry(cfg);
    const Grid grid = classify_nodes(geom, 4);
    CHECK_THROWS_AS(SoftPhase(geom, grid), EmptyDomainError);
}
