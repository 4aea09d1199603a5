#pragma once

#include <array>
#include <vector>

#include "hcs/discrete_ops.hpp"
#include "hcs/geometry.hpp"

namespace hcs {

/// Periodic corrector N^(i) on the nodes of fiber i and the effective
/// coefficient a_hom_i it induces.
struct CellSolution {
    int axis = 0;
    DofMap dofs;           ///< fiber-i nodes
    VectorXcd corrector;   ///< N on `dofs`, discrete mean zero
    double a_hom = 0.0;
    double discrete_measure = 0.0;
    double residual = 0.0;  ///< relative residual of the discrete weak form
    /// Discrete flux integral of a1 (grad N + e_i) in each direction; entry `axis` equals a_hom.
    std::array<double, 3> flux{};
};

/// Solves the cell problem on the fiber along `axis` (periodic in y_axis,
/// natural condition on the lateral boundary, mean-zero gauge).
CellSolution solve_cell_problem(const CellGeometry& geom, const Grid& grid, int axis,
                                const LinearSolveOptions& options = {});

/// Diagonal A^hom; zero for axes without a fiber.
Eigen::Matrix3d effective_tensor(const std::vector<CellSolution>& solutions);

/// Effective tensor of the connected stiff host of the compact-inclusion
/// variant (cell problem periodic in all directions on the host nodes).
Eigen::Matrix3d host_effective_tensor(const CellGeometry& geom, const Grid& grid, const LinearSolveOptions& options = {});

/// Cell solutions for every fiber of the geometry, ascending axis.
std::vector<CellSolution> solve_all_cell_problems(const CellGeometry& geom, const Grid& grid,
                                                  const LinearSolveOptions& options = {});

}  // namespace hcs
