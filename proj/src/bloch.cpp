#include "hcs/bloch.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "hcs/errors.hpp"

namespace hcs {

SoftPhase::SoftPhase(const CellGeometry& geom, const Grid& grid)
    : dofs(grid.size(), [&](std::size_t x) { return grid.is_matrix(x); }), coeff(grid.size(), kStiff) {
    if (dofs.size() == 0) throw EmptyDomainError("the soft phase has no grid nodes");
    for (std::size_t x : dofs.nodes()) {
        coeff[x] = geom.a0().at(grid.lattice().position(x));
        a0_max = std::max(a0_max, coeff[x]);
    }
}

SparseOperator bloch_operator(const Grid& grid, const SoftPhase& soft, const QuasiMomentum& theta) {
    return assemble_stiffness(grid.lattice(), soft.coeff, theta, soft.dofs, Boundary::dirichlet_on_complement);
}

BlochDecomposition bloch_eigs(const CellGeometry& geom, const Grid& grid, const QuasiMomentum& theta, int m_max,
                              const BlochOptions& options) {
    if (m_max < 1) throw ValidationError("m_max must be at least 1");
    const SoftPhase soft(geom, grid);
    const SparseOperator a = bloch_operator(grid, soft, theta);
    const SparseOperator m = lumped_mass(soft.dofs.size(), grid.h());
    auto eig = eigensolve(a, m, m_max, options.eigen);
    return {theta, std::move(eig.eigenvalues), std::move(eig.eigenvectors), std::move(eig.residuals)};
}

std::vector<double> dirichlet_baseline(const CellGeometry& geom, const Grid& grid, int m_max,
                                       const BlochOptions& options) {
    const SoftPhase soft(geom, grid);
    const SparseOperator a =
        assemble_stiffness(grid.lattice(), soft.coeff, QuasiMomentum{}, soft.dofs, Boundary::dirichlet_everywhere);
    const SparseOperator m = lumped_mass(soft.dofs.size(), grid.h());
    return eigensolve(a, m, m_max, options.eigen).eigenvalues;
}

ThetaGrid make_theta_grid(int g, const CellGeometry& geom) {
    if (g < 1) throw ValidationError("theta grid needs g >= 1");
    ThetaGrid tg;
    tg.g = g;
    for (int k = 0; k < g; ++k)
        for (int j = 0; j < g; ++j)
            for (int i = 0; i < g; ++i) {
                tg.points.emplace_back(std::array<double, 3>{kTwoPi * i / g, kTwoPi * j / g, kTwoPi * k / g});
                tg.index.push_back({i, j, k});
            }
    if (g == 1) {
        // A single sample only holds theta = 0; add one point per hyperplane H_i.
        for (int axis : geom.fiber_axes()) {
            std::array<double, 3> t{M_PI, M_PI, M_PI};
            t[axis] = 0.0;
            tg.points.emplace_back(t);
            tg.index.push_back({-1, -1, -1});
        }
    }
    // Lexicographic in theta.
    std::vector<std::size_t> order(tg.points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return tg.points[a] < tg.points[b]; });
    ThetaGrid sorted;
    sorted.g = g;
    for (std::size_t i : order) {
        sorted.points.push_back(tg.points[i]);
        sorted.index.push_back(tg.index[i]);
    }
    return sorted;
}

std::vector<BlochDecomposition> theta_sweep(const CellGeometry& geom, const Grid& grid, const ThetaGrid& tgrid,
                                            int m_max, const BlochOptions& options) {
    const std::size_t count = tgrid.points.size();
    std::vector<BlochDecomposition> out(count);
    std::vector<std::string> failures(count);
    const SoftPhase soft(geom, grid);
    const SparseOperator mass = lumped_mass(soft.dofs.size(), grid.h());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < count; i = next++) {
            const auto& theta = tgrid.points[i];
            try {
                auto eig = eigensolve(bloch_operator(grid, soft, theta), mass, m_max, options.eigen);
                out[i] = {theta, std::move(eig.eigenvalues), std::move(eig.eigenvectors), std::move(eig.residuals)};
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const int threads = std::max(1, std::min<int>(options.threads, static_cast<int>(count)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::ostringstream os;
    bool failed = false;
    for (std::size_t i = 0; i < count; ++i) {
        if (failures[i].empty()) continue;
        const auto& t = tgrid.points[i].theta;
        os << (failed ? "; " : "") << "theta=(" << t[0] << "," << t[1] << "," << t[2] << "): " << failures[i];
        failed = true;
    }
    if (failed) throw ConvergenceError("theta sweep failed at " + os.str());
    return out;
}

std::vector<LipschitzViolation> lipschitz_violations(const ThetaGrid& tgrid,
                                                     const std::vector<BlochDecomposition>& sweep, double a0_max,
                                                     int branches, double slack) {
    std::vector<LipschitzViolation> out;
    const int g = tgrid.g;
    if (g < 2) return out;
    std::vector<std::ptrdiff_t> at(static_cast<std::size_t>(g) * g * g, -1);
    for (std::size_t p = 0; p < tgrid.points.size(); ++p) {
        const auto& ix = tgrid.index[p];
        if (ix[0] < 0) continue;
        at[ix[0] + g * (ix[1] + g * ix[2])] = static_cast<std::ptrdiff_t>(p);
    }
    const double c = std::sqrt(a0_max);
    const double step = kTwoPi / g;
    for (std::size_t p = 0; p < tgrid.points.size(); ++p) {
        const auto ix = tgrid.index[p];
        if (ix[0] < 0) continue;
        for (int d = 0; d < 3; ++d) {
            auto jx = ix;
            jx[d] = (jx[d] + 1) % g;
            const auto q = at[jx[0] + g * (jx[1] + g * jx[2])];
            if (q < 0 || q == static_cast<std::ptrdiff_t>(p)) continue;
            const auto& la = sweep[p].mu;
            const auto& lb = sweep[q].mu;
            const int nb = std::min<int>(branches, static_cast<int>(std::min(la.size(), lb.size())));
            for (int n = 0; n < nb; ++n) {
                const double lhs = std::abs(la[n] - lb[n]);
                const double rhs = c * step * (la[n] + lb[n]) + slack;
                if (lhs > rhs) out.push_back({tgrid.points[p], sweep[q].theta, n, lhs, rhs});
            }
        }
    }
    return out;
}

double domination_excess(const std::vector<BlochDecomposition>& sweep, const std::vector<double>& dirichlet) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& b : sweep) {
        const std::size_t nb = std::min(b.mu.size(), dirichlet.size());
        for (std::size_t n = 0; n < nb; ++n) worst = std::max(worst, b.mu[n] - dirichlet[n]);
    }
    return worst;
}

}  // namespace hcs
