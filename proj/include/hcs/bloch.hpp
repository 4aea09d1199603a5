#pragma once

#include <memory>
#include <vector>

#include "hcs/discrete_ops.hpp"
#include "hcs/geometry.hpp"

namespace hcs {

/// Soft-phase discretization shared by every theta: the MATRIX unknowns and
/// the node field a0 (infinite on stiff nodes, which gives zero trace on Gamma).
struct SoftPhase {
    DofMap dofs;
    std::vector<double> coeff;
    double a0_max = 0.0;

    SoftPhase(const CellGeometry& geom, const Grid& grid);
};

/// Weak-form stiffness of B_theta on the soft unknowns.
SparseOperator bloch_operator(const Grid& grid, const SoftPhase& soft, const QuasiMomentum& theta);

struct BlochDecomposition {
    QuasiMomentum theta;
    std::vector<double> mu;  ///< ascending (min-max order)
    MatrixXcd vectors;       ///< columns on SoftPhase::dofs, L^2(Q_0)-orthonormal
    std::vector<double> residuals;
};

struct BlochOptions {
    EigenOptions eigen;
    int threads = 1;
};

BlochDecomposition bloch_eigs(const CellGeometry& geom, const Grid& grid, const QuasiMomentum& theta, int m_max,
                              const BlochOptions& options = {});

/// Eigenvalues mu_n of the Dirichlet operator on Q_0 (zero trace on Gamma and
/// on the cell faces).
std::vector<double> dirichlet_baseline(const CellGeometry& geom, const Grid& grid, int m_max,
                                       const BlochOptions& options = {});

/// Uniform lattice theta_j in {2 pi k / g}, lexicographic, plus explicit
/// hyperplane points when g = 1.
struct ThetaGrid {
    int g = 1;
    std::vector<QuasiMomentum> points;
    /// Lattice multi-index of each point; -1 entries for explicit extras.
    std::vector<std::array<int, 3>> index;
};

ThetaGrid make_theta_grid(int g, const CellGeometry& geom);

/// Decompositions in the order of tgrid.points. Per-point failures are
/// collected and rethrown as one ConvergenceError naming each theta.
std::vector<BlochDecomposition> theta_sweep(const CellGeometry& geom, const Grid& grid, const ThetaGrid& tgrid,
                                            int m_max, const BlochOptions& options = {});

struct LipschitzViolation {
    QuasiMomentum a, b;
    int branch;
    double lhs, rhs;
};

/// Checks |l_n(a) - l_n(b)| <= sqrt(a0_max) |a - b| (l_n(a) + l_n(b)) + slack for
/// all lattice-adjacent pairs (periodic distance) and branches n < branches.
std::vector<LipschitzViolation> lipschitz_violations(const ThetaGrid& tgrid,
                                                     const std::vector<BlochDecomposition>& sweep, double a0_max,
                                                     int branches, double slack);

/// Largest lambda_n(theta) - mu_n over the sweep (<= 0 means domination holds).
double domination_excess(const std::vector<BlochDecomposition>& sweep, const std::vector<double>& dirichlet);

}  // namespace hcs
