#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "hcs/discrete_ops.hpp"
#include "hcs/errors.hpp"
#include "support.hpp"

using namespace hcs;

namespace {

Eigen::MatrixXcd dense(const SparseOperator& op) { return Eigen::MatrixXcd(op.matrix); }

SparseOperator full_cell(int n, const QuasiMomentum& theta, Boundary bc = Boundary::quasi_periodic) {
    const Lattice lat(n);
    const std::vector<double> c(lat.size(), 1.0);
    return assemble_stiffness(lat, c, theta, DofMap::all(lat.size()), bc);
}

SparseOperator from_dense(const Eigen::MatrixXcd& a) {
    SparseOperator op;
    op.matrix = a.sparseView();
    return op;
}

SparseOperator identity(Eigen::Index n) {
    SparseOperator op;
    op.matrix.resize(n, n);
    op.matrix.setIdentity();
    return op;
}

}  // namespace

TEST_CASE("quasi-momentum active set") {
    const auto g = build_geometry(hcs::testing::single_fiber(0));
    CHECK(QuasiMomentum({0.0, 1.0, 2.0}).active_set(g) == std::vector<int>{0});
    CHECK(QuasiMomentum({1e-300, 0.0, 0.0}).active_set(g).empty());
    CHECK_THROWS_AS(QuasiMomentum({kTwoPi, 0.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(QuasiMomentum({-0.1, 0.0, 0.0}), ValidationError);
}

TEST_CASE("periodic row sums vanish") {
    // dyadic spacing: every partial sum is exact
    const auto op = full_cell(8, QuasiMomentum{});
    const Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(op.dim());
    CHECK((op.matrix * ones).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    const Lattice lat(7);
    std::vector<double> c(lat.size());
    for (auto& v : c) v = u(rng);
    const auto var = assemble_stiffness(lat, c, QuasiMomentum{}, DofMap::all(lat.size()), Boundary::quasi_periodic);
    CHECK((var.matrix * Eigen::VectorXcd::Ones(var.dim())).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("wrapped plane wave is an eigenvector") {
    const int n = 8;
    const double h = 1.0 / n;
    const QuasiMomentum theta({M_PI, 0.0, 0.0});
    const auto op = full_cell(n, theta);
    const Lattice lat(n);
    Eigen::VectorXcd v(op.dim());
    for (std::size_t x = 0; x < lat.size(); ++x) v[x] = std::polar(1.0, M_PI * lat.position(x)[0]);

    // oracle: dense diagonalization of the n x n wrapped tridiagonal matrix
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        t(i, i) = 2.0 / (h * h);
        if (i + 1 < n) {
            t(i, i + 1) = -1.0 / (h * h);
            t(i + 1, i) = -1.0 / (h * h);
        }
    }
    t(n - 1, 0) = -std::polar(1.0, M_PI) / (h * h);
    t(0, n - 1) = -std::polar(1.0, -M_PI) / (h * h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(t);
    const double closed = 2.0 / (h * h) * (1.0 - std::cos(M_PI * h));
    double nearest = 1e300;
    for (int i = 0; i < n; ++i) nearest = std::min(nearest, std::abs(es.eigenvalues()[i] - closed));
    CHECK(nearest < 1e-10 * closed);

    // weak form: A = h^3 * strong operator
    const Eigen::VectorXcd av = op.matrix * v;
    CHECK((av - h * h * h * closed * v).norm() <= 1e-10 * av.norm());
}

TEST_CASE("Hermitian and positive semidefinite") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    std::normal_distribution<double> nrm;
    const Lattice lat(6);
    std::vector<double> c(lat.size());
    for (auto& v : c) v = 0.5 + std::abs(nrm(rng));
    for (int rep = 0; rep < 3; ++rep) {
        const QuasiMomentum theta({u(rng), u(rng), u(rng)});
        for (auto bc : {Boundary::quasi_periodic, Boundary::dirichlet_on_complement, Boundary::dirichlet_everywhere}) {
            const DofMap dom(lat.size(), [&](std::size_t x) { return x % 5 != 0; });
            const auto op = assemble_stiffness(lat, c, theta, dom, bc);
            const Eigen::MatrixXcd a = dense(op);
            CHECK((a - a.adjoint()).cwiseAbs().maxCoeff() == 0.0);
            for (int k = 0; k < 100; ++k) {
                Eigen::VectorXcd v(op.dim());
                for (auto& z : v) z = {nrm(rng), nrm(rng)};
                const cplx q = v.dot(op.matrix * v);
                CHECK(q.real() >= -1e-12 * v.squaredNorm());
            }
        }
    }
}

TEST_CASE("interior box operator is theta independent") {
    const int n = 16;
    const Lattice lat(n);
    const std::vector<double> c(lat.size(), 1.0);
    const DofMap dom(lat.size(), [&](std::size_t x) {
        const auto p = lat.position(x);
        return p[0] > 0.25 && p[0] < 0.75 && p[1] > 0.25 && p[1] < 0.75 && p[2] > 0.25 && p[2] < 0.75;
    });
    const auto a = assemble_stiffness(lat, c, QuasiMomentum{}, dom, Boundary::dirichlet_on_complement);
    const auto b = assemble_stiffness(lat, c, QuasiMomentum({1.0, 2.0, 3.0}), dom, Boundary::dirichlet_on_complement);
    CHECK((dense(a) - dense(b)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empty domain") {
    const Lattice lat(4);
    const std::vector<double> c(lat.size(), 1.0);
    const DofMap none(lat.size(), [](std::size_t) { return false; });
    CHECK_THROWS_AS(assemble_stiffness(lat, c, QuasiMomentum{}, none, Boundary::quasi_periodic), EmptyDomainError);
}

TEST_CASE("edge coefficients") {
    CHECK(edge_coefficient(1.0, 4.0) == doctest::Approx(1.6));
    CHECK(edge_coefficient(kStiff, 3.0) == 6.0);
    CHECK(std::isinf(edge_coefficient(kStiff, kStiff)));
}

TEST_CASE("Dirichlet form matches the assembled operator") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nrm;
    const Lattice lat(5);
    std::vector<double> c(lat.size());
    for (auto& v : c) v = 1.0 + std::abs(nrm(rng));
    const QuasiMomentum theta({0.4, 0.0, 2.5});
    const auto op = assemble_stiffness(lat, c, theta, DofMap::all(lat.size()), Boundary::quasi_periodic);
    Eigen::VectorXcd u(op.dim()), v(op.dim());
    for (auto& z : u) z = {nrm(rng), nrm(rng)};
    for (auto& z : v) z = {nrm(rng), nrm(rng)};
    const cplx q = dirichlet_form(lat, c, theta, u, v);
    const cplx ref = v.dot(op.matrix * u);
    CHECK(std::abs(q - ref) <= 1e-12 * std::abs(ref));
}

TEST_CASE("1D Dirichlet Laplacian lowest eigenvalue") {
    const int n = 64;
    const double h = 1.0 / (n + 1);
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        t(i, i) = 2.0 / (h * h);
        if (i + 1 < n) t(i, i + 1) = t(i + 1, i) = -1.0 / (h * h);
    }
    const double closed = 4.0 / (h * h) * std::pow(std::sin(M_PI * h / 2.0), 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(t);
    CHECK(std::abs(es.eigenvalues()[0] - closed) <= 1e-10 * closed);
    const auto eig = eigensolve(from_dense(t), identity(n), 3);
    CHECK(std::abs(eig.eigenvalues[0] - closed) <= 1e-9 * closed);
    for (double r : eig.residuals) CHECK(r <= 1e-8);
}

TEST_CASE("identity pencil") {
    const auto eig = eigensolve(identity(10), identity(10), 4);
    REQUIRE(eig.eigenvalues.size() == 4);
    for (double v : eig.eigenvalues) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("3D Dirichlet cube lowest eigenvalue") {
    const int n = 16;
    const double h = 1.0 / n;
    const auto a = full_cell(n, QuasiMomentum{}, Boundary::dirichlet_everywhere);
    const auto m = lumped_mass(a.dim(), h);
    const auto eig = eigensolve(a, m, 4);
    const double one = 4.0 / (h * h) * std::pow(std::sin(M_PI * h / 2.0), 2);
    const double two = 4.0 / (h * h) * std::pow(std::sin(M_PI * h), 2);
    CHECK(eig.eigenvalues[0] == doctest::Approx(3.0 * one).epsilon(1e-9));
    // triple second eigenvalue (2,1,1)
    for (int k = 1; k < 4; ++k) CHECK(eig.eigenvalues[k] == doctest::Approx(2.0 * one + two).epsilon(1e-9));
    // M-orthonormality
    const Eigen::MatrixXcd g = eig.eigenvectors.adjoint() * m.matrix * eig.eigenvectors;
    CHECK((g - Eigen::MatrixXcd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
    for (double r : eig.residuals) CHECK(r <= 1e-8);
}

TEST_CASE("eigensolver is deterministic and phase fixed") {
    const int n = 10;
    const auto a = full_cell(n, QuasiMomentum({0.7, 0.0, 1.3}));
    const auto m = lumped_mass(a.dim(), 1.0 / n);
    const auto e1 = eigensolve(a, m, 5);
    const auto e2 = eigensolve(a, m, 5);
    CHECK(e1.eigenvalues == e2.eigenvalues);
    CHECK((e1.eigenvectors - e2.eigenvectors).cwiseAbs().maxCoeff() == 0.0);
    for (int k = 0; k < 5; ++k) {
        const double top = e1.eigenvectors.col(k).cwiseAbs().maxCoeff();
        Eigen::Index idx = 0;
        while (std::abs(e1.eigenvectors(idx, k)) < top * (1.0 - 1e-10)) ++idx;
        CHECK(e1.eigenvectors(idx, k).imag() == 0.0);
        CHECK(e1.eigenvectors(idx, k).real() > 0.0);
    }
    // dense cross-check
    EigenOptions dense;
    dense.dense_threshold = 1 << 20;
    const auto e3 = eigensolve(a, m, 5, dense);
    for (int k = 0; k < 5; ++k) CHECK(e1.eigenvalues[k] == doctest::Approx(e3.eigenvalues[k]).epsilon(1e-9));
}

TEST_CASE("linear solve on a diagonal") {
    Eigen::VectorXcd d(6);
    d << 1, 2, 3, 4, 5, 6;
    SparseOperator a;
    a.matrix = Eigen::MatrixXcd(d.asDiagonal()).sparseView();
    const auto r = linear_solve(a, d);
    CHECK((r.x - Eigen::VectorXcd::Ones(6)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("periodic Laplacian with mean-zero gauge") {
    const auto a = full_cell(8, QuasiMomentum{});
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nrm;
    Eigen::VectorXcd b(a.dim());
    for (auto& z : b) z = nrm(rng);
    b.array() -= b.mean();
    LinearSolveOptions opt;
    opt.mean_zero_gauge = true;
    for (Eigen::Index limit : {Eigen::Index(60000), Eigen::Index(0)}) {
        opt.direct_limit = limit;
        const auto r = linear_solve(a, b, opt);
        CHECK(std::abs(r.x.mean()) <= 1e-10 * r.x.norm() / std::sqrt(double(r.x.size())));
        CHECK((a.matrix * r.x - b).norm() <= 1e-10 * b.norm());
    }
    CHECK_THROWS_AS(linear_solve(a, b), SingularSystemError);
}

TEST_CASE("random diagonally dominant system matches dense solve") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nrm;
    const int n = 100;
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng() % 7 == 0) {
                a(i, j) = {nrm(rng), nrm(rng)};
                a(j, i) = std::conj(a(i, j));
            }
    for (int i = 0; i < n; ++i) a(i, i) = a.row(i).cwiseAbs().sum() + 1.0;
    Eigen::VectorXcd b(n);
    for (auto& z : b) z = {nrm(rng), nrm(rng)};
    const Eigen::VectorXcd ref = a.ldlt().solve(b);
    LinearSolveOptions opt;
    for (Eigen::Index limit : {Eigen::Index(60000), Eigen::Index(0)}) {
        opt.direct_limit = limit;
        const auto r = linear_solve(from_dense(a), b, opt);
        CHECK((r.x - ref).norm() <= 1e-10 * ref.norm());
    }
}
