#include "hcs/cell_problems.hpp"

#include <cmath>

#include "hcs/errors.hpp"

namespace hcs {

namespace {

std::vector<double> stiff_field(const CellGeometry& geom, const Grid& grid, int owner) {
    std::vector<double> c(grid.size(), kStiff);
    for (std::size_t x = 0; x < grid.size(); ++x)
        if (grid.owned_by(x, owner)) c[x] = geom.a1().at(grid.lattice().position(x));
    return c;
}

CellSolution solve_on_owner(const CellGeometry& geom, const Grid& grid, int owner, int axis,
                            const LinearSolveOptions& options) {
    const Lattice& lat = grid.lattice();
    const double h = lat.h();

    CellSolution sol;
    sol.axis = axis;
    sol.dofs = DofMap(grid.size(), [&](std::size_t x) { return grid.owned_by(x, owner); });
    if (sol.dofs.size() == 0) throw ResolutionError("stiff component has no grid nodes");
    sol.discrete_measure = grid.discrete_measure(owner);

    const std::vector<double> coeff = stiff_field(geom, grid, owner);
    // quasi_periodic on a subset drops the lateral links: natural boundary on Gamma_i.
    const SparseOperator stiffness =
        assemble_stiffness(lat, coeff, QuasiMomentum{}, sol.dofs, Boundary::quasi_periodic);

    // Source from the e_i term: link x -> y along `axis` contributes h^2 kappa (phi_y - phi_x).
    VectorXcd rhs = VectorXcd::Zero(static_cast<Eigen::Index>(sol.dofs.size()));
    struct AxialLink {
        Eigen::Index from, to;
        double kappa;
        int dir;
    };
    std::vector<AxialLink> links;
    for (std::size_t x : sol.dofs.nodes()) {
        for (int dir = 0; dir < 3; ++dir) {
            const auto link = lat.forward(x, dir);
            if (!sol.dofs.contains(link.to)) continue;
            const double kappa = edge_coefficient(coeff[x], coeff[link.to]);
            links.push_back({sol.dofs.dof(x), sol.dofs.dof(link.to), kappa, dir});
            if (dir == axis) {
                rhs[sol.dofs.dof(x)] += h * h * kappa;
                rhs[sol.dofs.dof(link.to)] -= h * h * kappa;
            }
        }
    }

    if (rhs.cwiseAbs().maxCoeff() == 0.0) {
        sol.corrector = VectorXcd::Zero(rhs.size());
        sol.residual = 0.0;
    } else {
        LinearSolveOptions opt = options;
        opt.mean_zero_gauge = true;
        const auto res = linear_solve(stiffness, rhs, opt);
        sol.corrector = res.x;
        sol.residual = res.relative_residual;
    }

    // a_hom and the flux components use the stiffness edge coefficients.
    for (const auto& l : links) {
        const double dn = (sol.corrector[l.to] - sol.corrector[l.from]).real();
        sol.flux[l.dir] += h * h * l.kappa * dn + (l.dir == axis ? h * h * h * l.kappa : 0.0);
    }
    sol.a_hom = sol.flux[axis];
    return sol;
}

}  // namespace

CellSolution solve_cell_problem(const CellGeometry& geom, const Grid& grid, int axis,
                                const LinearSolveOptions& options) {
    if (!geom.has_fiber(axis)) throw GeometryError("no fiber along axis " + std::to_string(axis + 1));
    return solve_on_owner(geom, grid, axis, axis, options);
}

Eigen::Matrix3d host_effective_tensor(const CellGeometry& geom, const Grid& grid, const LinearSolveOptions& options) {
    if (geom.variant() != Variant::compact_inclusion) throw GeometryError("only the compact-inclusion variant has a host");
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    for (int d = 0; d < 3; ++d) {
        const auto s = solve_on_owner(geom, grid, kHostOwner, d, options);
        for (int e = 0; e < 3; ++e) a(e, d) = s.flux[e];
    }
    return (0.5 * (a + a.transpose())).eval();
}

Eigen::Matrix3d effective_tensor(const std::vector<CellSolution>& solutions) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Zero();
    for (const auto& s : solutions) a(s.axis, s.axis) = s.a_hom;
    return a;
}

std::vector<CellSolution> solve_all_cell_problems(const CellGeometry& geom, const Grid& grid,
                                                  const LinearSolveOptions& options) {
    std::vector<CellSolution> out;
    for (int axis : geom.fiber_axes()) out.push_back(solve_cell_problem(geom, grid, axis, options));
    return out;
}

}  // namespace hcs
