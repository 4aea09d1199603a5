#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "hcs/eps_validation.hpp"
#include "hcs/errors.hpp"
#include "support.hpp"

using namespace hcs;
using hcs::testing::inclusion;
using hcs::testing::single_fiber;

namespace {

EpsProblem problem(int K, QuasiMomentum theta = {}, std::array<int, 3> mode = {}) {
    EpsProblem p;
    p.K = K;
    p.theta = theta;
    p.mode = mode;
    p.profile = default_profile(theta);
    return p;
}

}  // namespace

TEST_CASE("constant forcing without contrast gives the constant solution") {
    const auto geom = build_geometry(single_fiber(0, {{0.25, 0.25}, {0.75, 0.75}}, 1.0, 3.0));
    const Grid cell = classify_nodes(geom, 4);
    EpsProblem p;
    p.K = 2;
    p.contrast = false;
    const auto field = solve_eps(geom, cell, p);
    CHECK((field.u - VectorXcd::Ones(field.u.size())).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zero forcing gives the zero solution") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 4);
    EpsProblem p;
    p.K = 2;
    p.profile = [](const Point&) { return cplx(0.0); };
    const auto field = solve_eps(geom, cell, p);
    CHECK(field.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("composite coefficients replicate the cell") {
    const auto geom = build_geometry(single_fiber(1, {{0.25, 0.25}, {0.75, 0.75}}, 2.0, 5.0));
    const Grid cell = classify_nodes(geom, 4);
    std::vector<bool> stiff;
    const auto c = eps_coefficients(geom, cell, 3, true, &stiff);
    const Lattice lat(12);
    REQUIRE(c.size() == lat.size());
    std::size_t count = 0;
    for (std::size_t X = 0; X < lat.size(); ++X) {
        const auto I = lat.coords(X);
        const std::size_t l = cell.lattice().index(I[0] % 4, I[1] % 4, I[2] % 4);
        CHECK(stiff[X] == !cell.is_matrix(l));
        CHECK(c[X] == (stiff[X] ? 5.0 : 2.0 / 9.0));
        count += stiff[X];
    }
    CHECK(count == 27 * cell.count_owned(1));
}

TEST_CASE("discrete energy identity") {
    const auto geom = build_geometry(single_fiber(0, {{0.25, 0.25}, {0.75, 0.75}}, 1.0, 2.0));
    const Grid cell = classify_nodes(geom, 8);
    for (const auto& t : {QuasiMomentum{}, QuasiMomentum({0.0, M_PI, 0.0})}) {
        const auto field = solve_eps(geom, cell, problem(2, t, {1, 0, 0}));
        CHECK(energy_identity_defect(field) <= 1e-9);
        CHECK(field.residual <= 1e-10);
    }
}

TEST_CASE("budget and quasi-momentum checks") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 8);
    CHECK_THROWS_AS(solve_eps(geom, cell, problem(17)), BudgetError);
    CHECK_THROWS_AS(solve_eps(geom, cell, problem(2, QuasiMomentum({0.0, 1.0, 0.0}))), ValidationError);
    CHECK_THROWS_AS(solve_eps(geom, cell, problem(0)), ValidationError);
    CHECK_NOTHROW(solve_eps(geom, cell, problem(4, QuasiMomentum({0.0, M_PI / 2, M_PI}))));
}

TEST_CASE("a priori norms stay below the bound") {
    const auto geom = build_geometry(single_fiber(0, {{0.25, 0.25}, {0.75, 0.75}}, 0.5, 2.0));
    const Grid cell = classify_nodes(geom, 4);
    for (int K : {2, 4}) {
        const auto field = solve_eps(geom, cell, problem(K, {}, {1, 1, 0}));
        const auto n = apriori_norms(field);
        const double c = apriori_constant(geom, K, true);
        CHECK(c >= 1.0);
        CHECK(n.l2 <= n.forcing * (1 + 1e-12));
        CHECK(n.stiff_gradient <= 0.5 * n.forcing * (1 + 1e-12));
        CHECK(n.scaled_gradient <= c * n.forcing);
    }
}

TEST_CASE("homogenized limit of constant forcing is constant") {
    const auto geom = build_geometry(single_fiber(2));
    const Grid cell = classify_nodes(geom, 8);
    const auto w = solve_homogenized(geom, cell, QuasiMomentum{}, {0, 0, 0}, {});
    REQUIRE(w.components == std::vector<int>{2});
    CHECK((w.w - VectorXcd::Ones(w.w.size())).cwiseAbs().maxCoeff() < 1e-10);

    const auto host = build_geometry(inclusion());
    const Grid hcell = classify_nodes(host, 8);
    const auto wh = solve_homogenized(host, hcell, QuasiMomentum{}, {0, 0, 0}, {});
    REQUIRE(wh.components == std::vector<int>{kHostOwner});
    CHECK((wh.w - VectorXcd::Ones(wh.w.size())).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("homogenized limit is linear in the profile") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 8);
    const QuasiMomentum t({0.0, M_PI, 0.0});
    const auto g1 = default_profile(t);
    const CellFunction g2 = [&](const Point& y) { return g1(y) * std::sin(kTwoPi * y[0]); };
    const CellFunction g3 = [&](const Point& y) { return g1(y) + cplx(0.0, 2.0) * g2(y); };
    const auto a = solve_homogenized(geom, cell, t, {1, 0, 0}, g1);
    const auto b = solve_homogenized(geom, cell, t, {1, 0, 0}, g2);
    const auto c = solve_homogenized(geom, cell, t, {1, 0, 0}, g3);
    CHECK((c.w - a.w - cplx(0.0, 2.0) * b.w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(a.residual < 1e-10);
}

TEST_CASE("inclusion limit away from theta = 0 is the resolvent on the soft phase") {
    const auto geom = build_geometry(inclusion());
    const Grid cell = classify_nodes(geom, 8);
    const QuasiMomentum t({M_PI, 0.0, M_PI / 2});
    const auto g = default_profile(t);
    const auto w = solve_homogenized(geom, cell, t, {1, 0, 0}, g);
    CHECK(w.components.empty());

    const SoftPhase soft(geom, cell);
    const int n = static_cast<int>(soft.dofs.size());
    const auto b = bloch_eigs(geom, cell, t, n);
    const double h3 = std::pow(cell.h(), 3);
    VectorXcd gs(n);
    for (int d = 0; d < n; ++d) gs[d] = g(cell.lattice().position(soft.dofs.node(d)));
    VectorXcd oracle = VectorXcd::Zero(n);
    for (int m = 0; m < n; ++m) oracle += (h3 * b.vectors.col(m).dot(gs) / (b.mu[m] + 1.0)) * b.vectors.col(m);
    for (std::size_t x = 0; x < cell.size(); ++x) {
        if (soft.dofs.contains(x))
            CHECK(std::abs(w.w[static_cast<Eigen::Index>(x)] - oracle[soft.dofs.dof(x)]) < 1e-10);
        else
            CHECK(w.w[static_cast<Eigen::Index>(x)] == cplx(0.0));
    }
}

TEST_CASE("pairing basics") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 4);
    auto field = solve_eps(geom, cell, problem(2, {}, {1, 0, 0}));
    const MacroFunction phi = [](const Point& x) { return std::polar(1.0, kTwoPi * x[0]) * (2.0 + x[1]); };
    const VectorXcd one = VectorXcd::Ones(static_cast<Eigen::Index>(cell.size()));

    cplx plain = 0.0;
    const double H3 = std::pow(field.lattice.h(), 3);
    for (std::size_t X = 0; X < field.lattice.size(); ++X)
        plain += field.u[static_cast<Eigen::Index>(X)] * std::conj(phi(field.lattice.position(X)));
    CHECK(std::abs(two_scale_pairing(field, phi, one, QuasiMomentum{}) - H3 * plain) < 1e-14);

    field.u.setZero();
    CHECK(two_scale_pairing(field, phi, one, QuasiMomentum{}) == cplx(0.0));
}

TEST_CASE("mean-value property on the sampled product") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 4);
    const QuasiMomentum t({0.0, M_PI, M_PI / 2});
    auto field = solve_eps(geom, cell, problem(4, t, {0, 1, 0}));
    // u = f = exp(i k.x) g(x/eps) pairs with phi = exp(i k.x), psi = g to mean(|g|^2)
    field.u = field.f;
    const auto g = default_profile(t);
    VectorXcd psi(static_cast<Eigen::Index>(cell.size()));
    double mean = 0.0;
    for (std::size_t x = 0; x < cell.size(); ++x) {
        psi[static_cast<Eigen::Index>(x)] = g(cell.lattice().position(x));
        mean += std::norm(psi[static_cast<Eigen::Index>(x)]);
    }
    mean /= static_cast<double>(cell.size());
    const MacroFunction phi = [](const Point& x) { return std::polar(1.0, kTwoPi * x[1]); };
    CHECK(std::abs(two_scale_pairing(field, phi, psi, t) - mean) < 1e-12);
    CHECK(test_norm(field, phi, psi, t) == doctest::Approx(std::sqrt(mean)).epsilon(1e-12));
}

TEST_CASE("pairings vanish without contrast away from theta = 0") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 4);
    const QuasiMomentum t({M_PI, M_PI, 0.0});
    const auto battery = default_battery(geom, cell, t, {1, 0, 0});
    std::vector<double> prev;
    for (int K : {2, 4, 8}) {
        auto p = problem(K, t, {1, 0, 0});
        p.contrast = false;
        const auto field = solve_eps(geom, cell, p);
        const double fn = apriori_norms(field).forcing;
        std::vector<double> r;
        for (const auto& b : battery)
            r.push_back(std::abs(two_scale_pairing(field, b.phi, b.psi, t)) / (fn * test_norm(field, b.phi, b.psi, t)));
        if (!prev.empty())
            for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] < prev[i]);
        prev = r;
    }
    for (double r : prev) CHECK(r < 0.05);
}

TEST_CASE("battery contents") {
    const auto geom = build_geometry(single_fiber(1));
    const Grid cell = classify_nodes(geom, 4);
    auto names = [](const std::vector<PairingTest>& b) {
        std::vector<std::string> n;
        for (const auto& t : b) n.push_back(t.name);
        return n;
    };
    CHECK(names(default_battery(geom, cell, QuasiMomentum{}, {1, 0, 0})) ==
          std::vector<std::string>{"phi1*v1", "phi2*v1", "phi1*v2", "phi2*v2", "phi1*b2", "phi2*b2", "phi1*1",
                                   "phi2*1"});
    CHECK(names(default_battery(geom, cell, QuasiMomentum({1.0, 1.0, 1.0}), {1, 0, 0})).size() == 4u);
}

TEST_CASE("small convergence report") {
    const auto geom = build_geometry(single_fiber(0));
    const Grid cell = classify_nodes(geom, 4);
    const QuasiMomentum t({0.0, M_PI, 0.0});
    ReportOptions opt;
    opt.Ks = {2, 4};
    const auto rep = convergence_report(geom, cell, t, {1, 0, 0}, default_profile(t), opt);
    REQUIRE(rep.rows.size() == 2u);
    CHECK(rep.rows[0].residuals.size() == rep.tests.size());
    CHECK(rep.apriori_pass);
    CHECK(rep.threshold_pass);
    CHECK(rep.pass);
    for (const auto& row : rep.rows) CHECK(row.energy_defect <= 1e-9);
    opt.Ks = {4, 2};
    CHECK_THROWS_AS(convergence_report(geom, cell, t, {1, 0, 0}, default_profile(t), opt), ValidationError);
}

TEST_CASE("Floquet spectrum equals the dense spectrum of the composite") {
    const auto geom = build_geometry(single_fiber(0, {{0.25, 0.25}, {0.75, 0.75}}, 1.0, 2.0));
    const Grid cell = classify_nodes(geom, 4);
    const int K = 3;
    const Lattice lat(K * 4);
    const auto c = eps_coefficients(geom, cell, K, true);
    const auto a = assemble_stiffness(lat, c, QuasiMomentum{}, DofMap::all(lat.size()), Boundary::quasi_periodic);
    const double H3 = std::pow(lat.h(), 3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Eigen::MatrixXcd(a.matrix) / H3, Eigen::EigenvaluesOnly);
    const auto spec = eps_spectrum(geom, cell, K, 3);
    REQUIRE(spec.size() == lat.size());
    const double top = es.eigenvalues().maxCoeff();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        CHECK(std::abs(spec[static_cast<std::size_t>(i)] - es.eigenvalues()[i]) <= 1e-10 * top);
}
