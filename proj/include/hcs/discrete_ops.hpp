#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "hcs/geometry.hpp"

namespace hcs {

using cplx = std::complex<double>;
using SpMat = Eigen::SparseMatrix<cplx>;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;
inline constexpr double kStiff = std::numeric_limits<double>::infinity();

/// Quasi-momentum theta in [0, 2pi)^3. Components are compared with 0 exactly.
struct QuasiMomentum {
    std::array<double, 3> theta{};

    QuasiMomentum() = default;
    explicit QuasiMomentum(std::array<double, 3> t);

    bool is_zero(int axis) const { return theta[axis] == 0.0; }
    /// I_theta = { i in I : theta_i = 0 }, ascending.
    std::vector<int> active_set(const CellGeometry& geom) const;
    bool operator==(const QuasiMomentum&) const = default;
    auto operator<=>(const QuasiMomentum&) const = default;
};

/// Bijection between a subset of lattice nodes and contiguous unknowns.
class DofMap {
public:
    DofMap() = default;
    DofMap(std::size_t nodes, const std::function<bool(std::size_t)>& in_domain);

    static DofMap all(std::size_t nodes);

    std::size_t size() const { return dof_to_node_.size(); }
    std::size_t node_count() const { return node_to_dof_.size(); }
    bool contains(std::size_t node) const { return node_to_dof_[node] >= 0; }
    std::int64_t dof(std::size_t node) const { return node_to_dof_[node]; }
    std::size_t node(std::size_t dof) const { return dof_to_node_[dof]; }
    const std::vector<std::size_t>& nodes() const { return dof_to_node_; }

private:
    std::vector<std::int64_t> node_to_dof_;
    std::vector<std::size_t> dof_to_node_;
};

struct SparseOperator {
    SpMat matrix;
    bool hermitian = true;
    Eigen::Index dim() const { return matrix.rows(); }
};

/// How links that leave the domain are treated.
enum class Boundary {
    quasi_periodic,           ///< dropped (natural condition); theta-wrap across cell faces
    dirichlet_on_complement,  ///< zero value outside the domain; theta-wrap across cell faces
    dirichlet_everywhere      ///< as above, and zero value on the cell faces themselves
};

/// Harmonic mean of two node coefficients. An infinite value marks a stiff
/// neighbour and gives the limit 2a.
double edge_coefficient(double a, double b);

/// Weak-form 7-point stiffness of -div(c grad .) on the domain unknowns:
/// entry h*kappa per link, kappa the harmonic mean of the end coefficients.
/// A link crossing the face y_j = 1 carries exp(+i theta_j) on the row of
/// its lower end. Throws EmptyDomainError for an empty domain.
SparseOperator assemble_stiffness(const Lattice& lattice, std::span<const double> coeff,
                                  const QuasiMomentum& theta, const DofMap& domain, Boundary bc);

/// Lumped mass h^3 * I.
SparseOperator lumped_mass(std::size_t dim, double h);

/// Discrete Dirichlet form q(u, v) = h * sum_links kappa (Du)(conj Dv) for
/// full-lattice vectors, skipping stiff-stiff links (both coefficients
/// infinite). For a link crossing the face y_j = 1 the far value is
/// multiplied by exp(i theta_j).
cplx dirichlet_form(const Lattice& lattice, std::span<const double> coeff, const QuasiMomentum& theta,
                    const VectorXcd& u, const VectorXcd& v);

/// Discrete L^2 inner product <u, v> = w * sum u conj(v).
cplx inner(const VectorXcd& u, const VectorXcd& v, double weight);

struct EigenDecomposition {
    std::vector<double> eigenvalues;  ///< ascending
    MatrixXcd eigenvectors;           ///< columns, M-orthonormal
    std::vector<double> residuals;    ///< ||A v - mu M v||_{M^-1} / max(1, |mu|)
    int iterations = 0;
};

struct EigenOptions {
    /// Relative residual target: ||A v - mu M v||_{M^-1} <= tol * max(1, |mu|).
    double tol = 1e-8;
    std::uint64_t seed = 20240917;
    int max_restarts = 60;
    /// Problems up to this size are diagonalized densely.
    Eigen::Index dense_threshold = 400;
    /// Iterative failures up to this size fall back to a dense solve.
    Eigen::Index dense_fallback_limit = 4000;
};

/// Lowest m eigenpairs of the Hermitian pencil (A, M), M diagonal positive.
/// Eigenvector phase: the first entry of largest modulus is real positive.
/// Throws ConvergenceError with diagnostics when the residual target is missed.
EigenDecomposition eigensolve(const SparseOperator& a, const SparseOperator& m, int m_max,
                              const EigenOptions& options = {});

struct LinearSolveOptions {
    double tol = 1e-10;
    /// Enforce sum(x) = 0 and treat constants as the kernel.
    bool mean_zero_gauge = false;
    int max_iterations = 20000;
    /// Above this size a Jacobi-preconditioned CG is used instead of a sparse
    /// LDL^T factorization.
    Eigen::Index direct_limit = 60000;
};

struct LinearSolveResult {
    VectorXcd x;
    double relative_residual = 0.0;
    int iterations = 0;
};

/// Solves A x = rhs for Hermitian positive (semi)definite A.
/// Throws SingularSystemError or ConvergenceError.
LinearSolveResult linear_solve(const SparseOperator& a, const VectorXcd& rhs, const LinearSolveOptions& options = {});

/// Reusable sparse LDL^T factorization of a Hermitian matrix.
class HermitianFactor {
public:
    explicit HermitianFactor(const SpMat& a);
    ~HermitianFactor();
    HermitianFactor(HermitianFactor&&) noexcept;
    HermitianFactor& operator=(HermitianFactor&&) noexcept;

    MatrixXcd solve(const MatrixXcd& rhs) const;
    /// min |D_ii| / max |D_ii| of the pivots.
    double pivot_ratio() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace hcs
