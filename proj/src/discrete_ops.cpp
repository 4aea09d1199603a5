#include "hcs/discrete_ops.hpp"

#include <cmath>

#include "hcs/errors.hpp"

namespace hcs {

QuasiMomentum::QuasiMomentum(std::array<double, 3> t) : theta(t) {
    for (double v : theta)
        if (!(v >= 0.0 && v < kTwoPi)) throw ValidationError("quasi-momentum components must lie in [0, 2pi)");
}

std::vector<int> QuasiMomentum::active_set(const CellGeometry& geom) const {
    std::vector<int> active;
    for (int axis : geom.fiber_axes())
        if (is_zero(axis)) active.push_back(axis);
    return active;
}

DofMap::DofMap(std::size_t nodes, const std::function<bool(std::size_t)>& in_domain) : node_to_dof_(nodes, -1) {
    for (std::size_t i = 0; i < nodes; ++i) {
        if (in_domain(i)) {
            node_to_dof_[i] = static_cast<std::int64_t>(dof_to_node_.size());
            dof_to_node_.push_back(i);
        }
    }
}

DofMap DofMap::all(std::size_t nodes) {
    return DofMap(nodes, [](std::size_t) { return true; });
}

double edge_coefficient(double a, double b) {
    if (std::isinf(a) && std::isinf(b)) return kStiff;
    if (std::isinf(a)) return 2.0 * b;
    if (std::isinf(b)) return 2.0 * a;
    return 2.0 * a * b / (a + b);
}

namespace {

cplx face_phase(const QuasiMomentum& theta, int dir, bool wraps) {
    if (!wraps || theta.theta[dir] == 0.0) return {1.0, 0.0};
    return std::polar(1.0, theta.theta[dir]);
}

}  // namespace

SparseOperator assemble_stiffness(const Lattice& lattice, std::span<const double> coeff,
                                  const QuasiMomentum& theta, const DofMap& domain, Boundary bc) {
    if (domain.size() == 0) throw EmptyDomainError("stiffness assembly on an empty node set");
    if (coeff.size() != lattice.size()) throw ValidationError("coefficient field does not match the lattice");

    const double h = lattice.h();
    const auto dim = static_cast<Eigen::Index>(domain.size());
    std::vector<double> diag(domain.size(), 0.0);
    std::vector<Eigen::Triplet<cplx>> triplets;
    triplets.reserve(domain.size() * 7);

    for (std::size_t x = 0; x < lattice.size(); ++x) {
        for (int dir = 0; dir < 3; ++dir) {
            const auto link = lattice.forward(x, dir);
            const std::size_t y = link.to;
            const bool in_x = domain.contains(x), in_y = domain.contains(y);
            if (!in_x && !in_y) continue;

            if (bc == Boundary::dirichlet_everywhere && link.wraps) {
                // Two half-links to the face, each with zero face value.
                if (in_x) diag[domain.dof(x)] += 2.0 * h * coeff[x];
                if (in_y) diag[domain.dof(y)] += 2.0 * h * coeff[y];
                continue;
            }

            const double kappa = edge_coefficient(coeff[x], coeff[y]);
            if (std::isinf(kappa)) continue;
            const double w = h * kappa;
            if (in_x && in_y) {
                const auto dx = domain.dof(x), dy = domain.dof(y);
                const cplx p = face_phase(theta, dir, link.wraps);
                diag[dx] += w;
                diag[dy] += w;
                triplets.emplace_back(dx, dy, -w * p);
                triplets.emplace_back(dy, dx, -w * std::conj(p));
            } else if (bc != Boundary::quasi_periodic) {
                diag[domain.dof(in_x ? x : y)] += w;
            }
        }
    }
    for (std::size_t d = 0; d < diag.size(); ++d) triplets.emplace_back(d, d, cplx(diag[d], 0.0));

    SparseOperator op;
    op.matrix.resize(dim, dim);
    op.matrix.setFromTriplets(triplets.begin(), triplets.end());
    op.matrix.makeCompressed();
    op.hermitian = true;
    return op;
}

SparseOperator lumped_mass(std::size_t dim, double h) {
    SparseOperator op;
    const auto n = static_cast<Eigen::Index>(dim);
    op.matrix.resize(n, n);
    op.matrix.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Eigen::Index i = 0; i < n; ++i) op.matrix.insert(i, i) = h * h * h;
    op.matrix.makeCompressed();
    return op;
}

cplx dirichlet_form(const Lattice& lattice, std::span<const double> coeff, const QuasiMomentum& theta,
                    const VectorXcd& u, const VectorXcd& v) {
    const double h = lattice.h();
    cplx sum = 0.0;
    for (std::size_t x = 0; x < lattice.size(); ++x) {
        for (int dir = 0; dir < 3; ++dir) {
            const auto link = lattice.forward(x, dir);
            const double kappa = edge_coefficient(coeff[x], coeff[link.to]);
            if (std::isinf(kappa)) continue;
            const cplx p = face_phase(theta, dir, link.wraps);
            const auto xi = static_cast<Eigen::Index>(x), yi = static_cast<Eigen::Index>(link.to);
            const cplx du = p * u[yi] - u[xi];
            const cplx dv = p * v[yi] - v[xi];
            sum += h * kappa * du * std::conj(dv);
        }
    }
    return sum;
}

cplx inner(const VectorXcd& u, const VectorXcd& v, double weight) {
    // Eigen's dot conjugates its first argument.
    return weight * v.dot(u);
}

}  // namespace hcs
