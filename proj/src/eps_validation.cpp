#include "hcs/eps_validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include "hcs/beta_spectrum.hpp"
#include "hcs/cell_problems.hpp"
#include "hcs/errors.hpp"

namespace hcs {

namespace {

std::size_t local_node(const Lattice& composite, const Lattice& cell, std::size_t X, std::array<int, 3>* c) {
    const auto I = composite.coords(X);
    const int p = cell.n();
    if (c) *c = {I[0] / p, I[1] / p, I[2] / p};
    return cell.index(I[0] % p, I[1] % p, I[2] % p);
}

cplx plane_wave(const std::array<int, 3>& mode, const Point& x) {
    return std::polar(1.0, kTwoPi * (mode[0] * x[0] + mode[1] * x[1] + mode[2] * x[2]));
}

void check_theta(const QuasiMomentum& theta, int K) {
    for (double t : theta.theta) {
        const double r = t * K / kTwoPi;
        if (std::abs(r - std::round(r)) > 1e-9)
            throw ValidationError("K theta_j must be a multiple of 2 pi for the torus with K cells");
    }
}

}  // namespace

std::vector<double> eps_coefficients(const CellGeometry& geom, const Grid& cell, int K, bool contrast,
                                     std::vector<bool>* stiff) {
    const Lattice& cl = cell.lattice();
    const Lattice composite(K * cl.n());
    const double eps = 1.0 / K;
    std::vector<double> local(cl.size());
    std::vector<bool> local_stiff(cl.size());
    for (std::size_t x = 0; x < cl.size(); ++x) {
        const Point y = cl.position(x);
        local_stiff[x] = !cell.is_matrix(x);
        local[x] = local_stiff[x] ? geom.a1().at(y) : (contrast ? eps * eps : 1.0) * geom.a0().at(y);
    }
    std::vector<double> c(composite.size());
    if (stiff) stiff->assign(composite.size(), false);
    for (std::size_t X = 0; X < composite.size(); ++X) {
        const std::size_t l = local_node(composite, cl, X, nullptr);
        c[X] = local[l];
        if (stiff) (*stiff)[X] = local_stiff[l];
    }
    return c;
}

EpsField solve_eps(const CellGeometry& geom, const Grid& cell, const EpsProblem& prob) {
    if (prob.K < 1) throw ValidationError("K must be at least 1");
    const int p = cell.n();
    if (prob.K * p > prob.budget) {
        std::ostringstream os;
        os << "K p = " << prob.K * p << " exceeds the per-axis budget " << prob.budget;
        throw BudgetError(os.str());
    }
    check_theta(prob.theta, prob.K);

    EpsField out;
    out.K = prob.K;
    out.p = p;
    out.lattice = Lattice(prob.K * p);
    out.coeff = eps_coefficients(geom, cell, prob.K, prob.contrast, &out.stiff);
    const Lattice& lat = out.lattice;
    const double H = lat.h();
    const double H3 = H * H * H;

    out.f.resize(static_cast<Eigen::Index>(lat.size()));
    for (std::size_t X = 0; X < lat.size(); ++X) {
        const Point x = lat.position(X);
        const Point y{x[0] * prob.K, x[1] * prob.K, x[2] * prob.K};
        out.f[static_cast<Eigen::Index>(X)] = plane_wave(prob.mode, x) * (prob.profile ? prob.profile(y) : cplx(1.0));
    }

    SparseOperator a = assemble_stiffness(lat, out.coeff, QuasiMomentum{}, DofMap::all(lat.size()), Boundary::quasi_periodic);
    a.matrix += lumped_mass(lat.size(), H).matrix;
    const VectorXcd rhs = H3 * out.f;
    if (rhs.norm() == 0.0) {
        out.u = VectorXcd::Zero(rhs.size());
        return out;
    }
    const auto res = linear_solve(a, rhs, prob.solver);
    out.u = res.x;
    out.residual = res.relative_residual;
    out.iterations = res.iterations;
    return out;
}

double energy_identity_defect(const EpsField& field) {
    const double H3 = std::pow(field.lattice.h(), 3);
    const double lhs = dirichlet_form(field.lattice, field.coeff, QuasiMomentum{}, field.u, field.u).real() +
                       H3 * field.u.squaredNorm();
    const double rhs = (H3 * field.u.dot(field.f)).real();
    if (rhs == 0.0) return std::abs(lhs);
    return std::abs(lhs - rhs) / std::abs(rhs);
}

AprioriNorms apriori_norms(const EpsField& field) {
    const Lattice& lat = field.lattice;
    const double H = lat.h();
    const double eps = 1.0 / field.K;
    double stiff = 0.0, grad = 0.0;
    for (std::size_t x = 0; x < lat.size(); ++x)
        for (int dir = 0; dir < 3; ++dir) {
            const std::size_t y = lat.forward(x, dir).to;
            const double d = std::norm(field.u[static_cast<Eigen::Index>(y)] - field.u[static_cast<Eigen::Index>(x)]);
            grad += H * d;
            if (field.stiff[x] && field.stiff[y]) stiff += H * edge_coefficient(field.coeff[x], field.coeff[y]) * d;
        }
    const double H3 = H * H * H;
    AprioriNorms n;
    n.stiff_gradient = std::sqrt(stiff);
    n.scaled_gradient = eps * std::sqrt(grad);
    n.l2 = std::sqrt(H3 * field.u.squaredNorm());
    n.forcing = std::sqrt(H3 * field.f.squaredNorm());
    return n;
}

double apriori_constant(const CellGeometry& geom, int K, bool contrast) {
    // a(u,u) <= ||f||^2 / 4 and eps^2 <= kappa * max(eps^2 / kappa) on every link.
    const double eps2 = 1.0 / (static_cast<double>(K) * K);
    const double a0 = geom.a0().min(), a1 = geom.a1().min();
    const double ratio = contrast ? std::max(1.0 / a0, eps2 / a1) : eps2 / std::min(a0, a1);
    return std::max(1.0, 0.5 * std::sqrt(ratio));
}

HomogenizedField solve_homogenized(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                   const std::array<int, 3>& mode, const CellFunction& profile) {
    const Lattice& lat = cell.lattice();
    const double h3 = std::pow(lat.h(), 3);
    const SoftPhase soft(geom, cell);
    const std::array<double, 3> k{kTwoPi * mode[0], kTwoPi * mode[1], kTwoPi * mode[2]};

    HomogenizedField out;
    out.theta = theta;
    out.mode = mode;
    std::vector<double> macro;
    out.components = theta.active_set(geom);
    if (!out.components.empty()) {
        const Eigen::Matrix3d a = effective_tensor(solve_all_cell_problems(geom, cell));
        for (int ax : out.components) macro.push_back(a(ax, ax) * k[ax] * k[ax]);
    }
    const bool host = geom.variant() == Variant::compact_inclusion &&
                      theta.is_zero(0) && theta.is_zero(1) && theta.is_zero(2);
    if (host) {
        const Eigen::Matrix3d a = host_effective_tensor(geom, cell);
        const Eigen::Vector3d kv(k[0], k[1], k[2]);
        out.components.push_back(kHostOwner);
        macro.push_back(kv.dot(a * kv));
    }

    const auto n0 = static_cast<Eigen::Index>(soft.dofs.size());
    const auto nc = static_cast<Eigen::Index>(out.components.size());
    const auto full = assemble_stiffness(lat, soft.coeff, theta, DofMap::all(lat.size()), Boundary::quasi_periodic);
    SpMat p(static_cast<Eigen::Index>(lat.size()), n0 + nc);
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::size_t x = 0; x < lat.size(); ++x) {
        if (soft.dofs.contains(x)) {
            t.emplace_back(x, soft.dofs.dof(x), 1.0);
            continue;
        }
        for (Eigen::Index c = 0; c < nc; ++c)
            if (cell.owned_by(x, out.components[c])) t.emplace_back(x, n0 + c, 1.0);
    }
    p.setFromTriplets(t.begin(), t.end());
    SpMat s = p.adjoint() * full.matrix * p;
    for (Eigen::Index i = 0; i < n0; ++i) s.coeffRef(i, i) += h3;
    for (Eigen::Index c = 0; c < nc; ++c)
        s.coeffRef(n0 + c, n0 + c) += macro[c] + cell.discrete_measure(out.components[c]);
    s.makeCompressed();

    VectorXcd g(static_cast<Eigen::Index>(lat.size()));
    for (std::size_t x = 0; x < lat.size(); ++x)
        g[static_cast<Eigen::Index>(x)] = profile ? profile(lat.position(x)) : cplx(1.0);
    const VectorXcd rhs = p.adjoint() * (h3 * g);

    const HermitianFactor factor(s);
    VectorXcd sol = factor.solve(rhs);
    for (int it = 0; it < 2; ++it) sol += factor.solve(rhs - s * sol);
    out.residual = rhs.norm() > 0.0 ? (rhs - s * sol).norm() / rhs.norm() : 0.0;
    out.w = p * sol;
    for (Eigen::Index c = 0; c < nc; ++c) out.component_values.push_back(sol[n0 + c]);
    return out;
}

cplx two_scale_pairing(const EpsField& field, const MacroFunction& phi, const VectorXcd& psi,
                       const QuasiMomentum& theta) {
    const Lattice& lat = field.lattice;
    const Lattice cell(field.p);
    const double H3 = std::pow(lat.h(), 3);
    cplx sum = 0.0;
    for (std::size_t X = 0; X < lat.size(); ++X) {
        std::array<int, 3> c;
        const std::size_t l = local_node(lat, cell, X, &c);
        const cplx phase = std::polar(1.0, theta.theta[0] * c[0] + theta.theta[1] * c[1] + theta.theta[2] * c[2]);
        sum += field.u[static_cast<Eigen::Index>(X)] *
               std::conj(phi(lat.position(X)) * psi[static_cast<Eigen::Index>(l)] * phase);
    }
    return H3 * sum;
}

double test_norm(const EpsField& field, const MacroFunction& phi, const VectorXcd& psi, const QuasiMomentum&) {
    const Lattice& lat = field.lattice;
    const Lattice cell(field.p);
    const double H3 = std::pow(lat.h(), 3);
    double sum = 0.0;
    for (std::size_t X = 0; X < lat.size(); ++X) {
        const std::size_t l = local_node(lat, cell, X, nullptr);
        sum += std::norm(phi(lat.position(X)) * psi[static_cast<Eigen::Index>(l)]);
    }
    return std::sqrt(H3 * sum);
}

cplx limit_pairing(const HomogenizedField& limit, const EpsField& field, const MacroFunction& phi,
                   const VectorXcd& psi) {
    const Lattice& lat = field.lattice;
    const double H3 = std::pow(lat.h(), 3);
    cplx macro = 0.0;
    for (std::size_t X = 0; X < lat.size(); ++X) {
        const Point x = lat.position(X);
        macro += plane_wave(limit.mode, x) * std::conj(phi(x));
    }
    macro *= H3;
    const double h3 = std::pow(1.0 / field.p, 3);
    const cplx micro = h3 * psi.dot(limit.w);
    return macro * micro;
}

std::vector<PairingTest> default_battery(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                         const std::array<int, 3>& mode) {
    std::vector<PairingTest> out;
    const MacroFunction phi1 = [mode](const Point& x) { return plane_wave(mode, x); };
    const MacroFunction phi2 = [mode](const Point& x) {
        return plane_wave(mode, x) * (1.0 + 0.5 * std::cos(kTwoPi * x[1]));
    };
    const auto n = static_cast<Eigen::Index>(cell.size());
    const BlochDecomposition bloch = bloch_eigs(geom, cell, theta, 2);
    const SoftPhase soft(geom, cell);
    std::vector<std::pair<std::string, VectorXcd>> psis;
    for (int m = 0; m < 2; ++m) {
        VectorXcd v = VectorXcd::Zero(n);
        for (std::size_t d = 0; d < soft.dofs.size(); ++d)
            v[static_cast<Eigen::Index>(soft.dofs.node(d))] = bloch.vectors(static_cast<Eigen::Index>(d), m);
        psis.emplace_back("v" + std::to_string(m + 1), v);
    }
    if (!theta.active_set(geom).empty()) {
        const LiftSet lifts = solve_lifts(geom, cell, theta, bloch);
        for (std::size_t c = 0; c < lifts.active.size(); ++c)
            psis.emplace_back("b" + std::to_string(lifts.active[c] + 1), lifts.full.col(static_cast<Eigen::Index>(c)));
    }
    if (theta.is_zero(0) && theta.is_zero(1) && theta.is_zero(2)) psis.emplace_back("1", VectorXcd::Ones(n));
    for (const auto& [name, psi] : psis) {
        out.push_back({"phi1*" + name, phi1, psi});
        out.push_back({"phi2*" + name, phi2, psi});
    }
    return out;
}

CellFunction default_profile(const QuasiMomentum& theta) {
    return [theta](const Point& y) {
        const double ph = theta.theta[0] * y[0] + theta.theta[1] * y[1] + theta.theta[2] * y[2];
        return std::polar(1.0, ph) * (1.0 + 0.5 * std::cos(kTwoPi * y[1]));
    };
}

TwoScaleReport convergence_report(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                  const std::array<int, 3>& mode, const CellFunction& profile,
                                  const ReportOptions& options) {
    if (options.Ks.empty()) throw ValidationError("eps list is empty");
    for (std::size_t i = 1; i < options.Ks.size(); ++i)
        if (options.Ks[i] <= options.Ks[i - 1]) throw ValidationError("eps list must be decreasing (K increasing)");

    TwoScaleReport rep;
    rep.theta = theta;
    rep.mode = mode;
    const auto battery = default_battery(geom, cell, theta, mode);
    for (const auto& t : battery) rep.tests.push_back(t.name);
    const HomogenizedField limit = solve_homogenized(geom, cell, theta, mode, profile);

    rep.apriori_pass = true;
    for (int K : options.Ks) {
        EpsProblem prob;
        prob.K = K;
        prob.theta = theta;
        prob.mode = mode;
        prob.profile = profile;
        prob.budget = options.budget;
        prob.solver = options.solver;
        const EpsField field = solve_eps(geom, cell, prob);
        EpsRow row;
        row.K = K;
        row.norms = apriori_norms(field);
        row.energy_defect = energy_identity_defect(field);
        row.solve_residual = field.residual;
        row.iterations = field.iterations;
        for (const auto& t : battery) {
            const cplx pr = two_scale_pairing(field, t.phi, t.psi, theta);
            const cplx lm = limit_pairing(limit, field, t.phi, t.psi);
            const double scale = row.norms.forcing * test_norm(field, t.phi, t.psi, theta);
            row.pairings.push_back(pr);
            row.limits.push_back(lm);
            row.residuals.push_back(scale > 0.0 ? std::abs(pr - lm) / scale : std::abs(pr - lm));
        }
        const double c = apriori_constant(geom, K, true);
        rep.apriori_bound = std::max(rep.apriori_bound, c);
        rep.rows.push_back(std::move(row));
    }
    for (const auto& row : rep.rows) {
        const double bound = rep.apriori_bound * row.norms.forcing * (1.0 + 1e-9);
        rep.apriori_pass = rep.apriori_pass && row.norms.stiff_gradient <= bound &&
                           row.norms.scaled_gradient <= bound && row.norms.l2 <= bound;
    }
    rep.monotone_pass = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i)
        for (std::size_t t = 0; t < battery.size(); ++t)
            rep.monotone_pass = rep.monotone_pass &&
                                rep.rows[i].residuals[t] <= (1.0 + options.slack) * rep.rows[i - 1].residuals[t];
    rep.threshold_pass = true;
    for (double r : rep.rows.back().residuals) rep.threshold_pass = rep.threshold_pass && r <= options.threshold;
    rep.pass = rep.monotone_pass && rep.threshold_pass;
    return rep;
}

std::vector<double> eps_spectrum(const CellGeometry& geom, const Grid& cell, int K, int threads) {
    const int p = cell.n();
    const Lattice block(p, 1.0 / (static_cast<double>(K) * p));
    const double H3 = std::pow(block.h(), 3);
    const double eps = 1.0 / K;
    std::vector<double> coeff(cell.size());
    for (std::size_t x = 0; x < cell.size(); ++x) {
        const Point y = cell.lattice().position(x);
        coeff[x] = cell.is_matrix(x) ? eps * eps * geom.a0().at(y) : geom.a1().at(y);
    }

    // theta and -theta give conjugate blocks with equal spectra.
    std::vector<std::array<int, 3>> reps;
    std::vector<int> weight;
    for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
            for (int c = 0; c < K; ++c) {
                const std::array<int, 3> j{a, b, c}, m{(K - a) % K, (K - b) % K, (K - c) % K};
                if (m < j) continue;
                reps.push_back(j);
                weight.push_back(m == j ? 1 : 2);
            }

    std::vector<std::vector<double>> values(reps.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < reps.size(); i = next++) {
            const QuasiMomentum theta(
                {kTwoPi * reps[i][0] / K, kTwoPi * reps[i][1] / K, kTwoPi * reps[i][2] / K});
            const auto op = assemble_stiffness(block, coeff, theta, DofMap::all(block.size()), Boundary::quasi_periodic);
            const Eigen::MatrixXcd a = Eigen::MatrixXcd(op.matrix) / H3;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a, Eigen::EigenvaluesOnly);
            values[i].assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        }
    };
    const int nt = std::max(1, std::min<int>(threads, static_cast<int>(reps.size())));
    if (nt == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    std::vector<double> out;
    for (std::size_t i = 0; i < reps.size(); ++i)
        for (int w = 0; w < weight[i]; ++w) out.insert(out.end(), values[i].begin(), values[i].end());
    std::sort(out.begin(), out.end());
    return out;
}

SpectralSpotCheck spectral_spot_check(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta_star,
                                      const std::vector<int>& Ks, int threads) {
    SpectralSpotCheck out;
    out.theta_star = theta_star;
    out.Ks = Ks;
    BlochOptions opt;
    opt.eigen.tol = 1e-10;
    out.lambda_star = bloch_eigs(geom, cell, theta_star, 1, opt).mu[0];
    for (int K : Ks) {
        const auto spec = eps_spectrum(geom, cell, K, threads);
        auto it = std::lower_bound(spec.begin(), spec.end(), out.lambda_star);
        double best = std::numeric_limits<double>::infinity(), nearest = 0.0;
        for (auto j : {it, it == spec.begin() ? it : std::prev(it)}) {
            if (j == spec.end()) continue;
            if (std::abs(*j - out.lambda_star) < best) {
                best = std::abs(*j - out.lambda_star);
                nearest = *j;
            }
        }
        out.distance.push_back(best);
        out.nearest.push_back(nearest);
    }
    out.pass = out.distance.size() >= 2;
    for (std::size_t i = 1; i < out.distance.size(); ++i) out.pass = out.pass && out.distance[i] < out.distance[i - 1];
    return out;
}

}  // namespace hcs
