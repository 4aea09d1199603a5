#include "hcs/beta_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hcs/errors.hpp"

namespace hcs {

LiftSet solve_lifts(const CellGeometry& geom, const Grid& grid, const QuasiMomentum& theta,
                    const BlochDecomposition& bloch, int moments) {
    LiftSet out;
    out.theta = theta;
    out.active = theta.active_set(geom);
    if (out.active.empty())
        throw EmptyActiveSetError("I_theta is empty: every fiber axis has theta_i != 0, the spatial operator is zero");

    const Lattice& lat = grid.lattice();
    const double h = lat.h();
    const double h3 = h * h * h;
    const SoftPhase soft(geom, grid);
    const SparseOperator a0 = bloch_operator(grid, soft, theta);
    const auto n0 = static_cast<Eigen::Index>(soft.dofs.size());
    const auto k = static_cast<Eigen::Index>(out.active.size());
    if (bloch.vectors.rows() != n0) throw ValidationError("Bloch decomposition does not match the grid");

    // Right-hand side: minus the coupling of each soft node to the unit trace on fiber j.
    MatrixXcd rhs = MatrixXcd::Zero(n0, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const int axis = out.active[c];
        for (std::size_t x = 0; x < lat.size(); ++x) {
            for (int dir = 0; dir < 3; ++dir) {
                const auto link = lat.forward(x, dir);
                const std::size_t y = link.to;
                const bool xs = soft.dofs.contains(x), ys = soft.dofs.contains(y);
                if (xs == ys) continue;
                const std::size_t s = xs ? x : y, f = xs ? y : x;
                if (!grid.owned_by(f, axis)) continue;
                const double w = h * edge_coefficient(soft.coeff[s], soft.coeff[f]);
                cplx p = 1.0;
                if (link.wraps && theta.theta[dir] != 0.0) p = std::polar(1.0, theta.theta[dir]);
                // Row s of the full operator holds -w p (forward) or -w conj(p) (backward).
                rhs(soft.dofs.dof(s), c) += xs ? w * p : w * std::conj(p);
            }
        }
    }

    const HermitianFactor factor(a0.matrix);
    out.values = factor.solve(rhs);
    for (int it = 0; it < 2; ++it) out.values += factor.solve(rhs - a0.matrix * out.values);
    for (Eigen::Index c = 0; c < k; ++c) {
        const double nb = rhs.col(c).norm();
        const double nr = (rhs.col(c) - a0.matrix * out.values.col(c)).norm();
        out.residual = std::max(out.residual, nb > 0.0 ? nr / nb : nr);
    }

    out.full = MatrixXcd::Zero(static_cast<Eigen::Index>(lat.size()), k);
    for (Eigen::Index c = 0; c < k; ++c) {
        for (std::size_t x = 0; x < lat.size(); ++x) {
            if (soft.dofs.contains(x))
                out.full(static_cast<Eigen::Index>(x), c) = out.values(soft.dofs.dof(x), c);
            else if (grid.owned_by(x, out.active[c]))
                out.full(static_cast<Eigen::Index>(x), c) = 1.0;
        }
        out.fiber_measure.push_back(grid.discrete_measure(out.active[c]));
    }

    // b^(i)_m = h^3 sum_x b^(i)_x conj(v^(m)_x)
    out.coefficients = h3 * (bloch.vectors.adjoint() * out.values);

    out.gram = h3 * (out.values.adjoint() * out.values);
    out.energy = MatrixXcd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            out.energy(i, j) = dirichlet_form(lat, soft.coeff, theta, out.full.col(j), out.full.col(i));
    // c_p = (M^{-1} A)^{-p} b; R_{2p} = <c_p, c_p>, R_{2p+1} = <c_{p+1}, c_p>.
    std::vector<MatrixXcd> c{out.values};
    for (int p = 1; 2 * (p - 1) < moments; ++p) {
        const MatrixXcd rhs_p = h3 * c.back();
        MatrixXcd next = factor.solve(rhs_p);
        for (int it = 0; it < 2; ++it) next += factor.solve(rhs_p - a0.matrix * next);
        c.push_back(std::move(next));
    }
    for (int kk = 1; kk <= moments; ++kk) {
        const auto& u = c[(kk + 1) / 2];
        const auto& v = c[kk / 2];
        MatrixXcd r = h3 * (v.adjoint() * u);
        out.moments.push_back((0.5 * (r + r.adjoint())).eval());
    }
    out.gram = (0.5 * (out.gram + out.gram.adjoint())).eval();
    out.energy = (0.5 * (out.energy + out.energy.adjoint())).eval();
    return out;
}

cplx flux(const Grid& grid, const SoftPhase& soft, const SparseOperator& a0, const QuasiMomentum& theta,
          const VectorXcd& v, const VectorXcd& lift_full) {
    const Lattice& lat = grid.lattice();
    VectorXcd v_full = VectorXcd::Zero(static_cast<Eigen::Index>(lat.size()));
    VectorXcd lift_soft(static_cast<Eigen::Index>(soft.dofs.size()));
    for (std::size_t d = 0; d < soft.dofs.size(); ++d) {
        const auto node = static_cast<Eigen::Index>(soft.dofs.node(d));
        v_full[node] = v[static_cast<Eigen::Index>(d)];
        lift_soft[static_cast<Eigen::Index>(d)] = lift_full[node];
    }
    const cplx q = dirichlet_form(lat, soft.coeff, theta, v_full, lift_full);
    // Weak operator: <A_0 v, b>_{L^2} = sum (A_weak v)_x conj(b_x).
    const cplx av = lift_soft.dot(a0.matrix * v);
    return q - av;
}

BetaMatrix::BetaMatrix(const LiftSet& lifts, const BlochDecomposition& bloch, BetaForm form, double pole_guard_rel,
                       int m_max, TailCorrection tail)
    : theta_(lifts.theta), active_(lifts.active), form_(form) {
    const int available = static_cast<int>(bloch.mu.size());
    const int m = m_max < 0 ? available : std::min(m_max, available);
    if (m < 1) throw ValidationError("beta matrix needs at least one Bloch eigenpair");
    if (lifts.coefficients.rows() < m) throw ValidationError("lift coefficients are shorter than the truncation");
    poles_.assign(bloch.mu.begin(), bloch.mu.begin() + m);
    coeff_ = lifts.coefficients.topRows(m);
    guard_ = pole_guard_rel * poles_.front();

    const auto k = static_cast<Eigen::Index>(active_.size());
    linear_part_ = MatrixXcd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) linear_part_(i, i) = lifts.fiber_measure[i];
    if (form_ == BetaForm::regularized) {
        linear_part_ += lifts.gram;
        static_part_ = -lifts.energy;
    } else {
        static_part_ = MatrixXcd::Zero(k, k);
    }
    // With every mode retained the tail vanishes; skip it rather than amplify roundoff.
    const bool complete = m == bloch.vectors.rows();
    if (form_ == BetaForm::regularized && tail == TailCorrection::static_moments && !complete) {
        // lambda^2 / (mu - lambda) = sum_k lambda^(k+2) / mu^(k+1)
        Eigen::VectorXd w = Eigen::VectorXd::Ones(m);
        for (const auto& r : lifts.moments) {
            for (int i = 0; i < m; ++i) w[i] /= poles_[i];
            MatrixXcd t = r - coeff_.adjoint() * w.cast<cplx>().asDiagonal() * coeff_;
            tail_.push_back((0.5 * (t + t.adjoint())).eval());
        }
    }
}

bool BetaMatrix::near_pole(double lambda) const {
    return std::any_of(poles_.begin(), poles_.end(), [&](double mu) { return std::abs(mu - lambda) <= guard_; });
}

MatrixXcd BetaMatrix::operator()(double lambda) const {
    if (near_pole(lambda)) {
        std::ostringstream os;
        os << "lambda = " << lambda << " lies within the pole guard " << guard_ << " of a Bloch eigenvalue";
        throw PoleProximityError(os.str());
    }
    Eigen::VectorXd w(static_cast<Eigen::Index>(poles_.size()));
    for (std::size_t m = 0; m < poles_.size(); ++m) {
        const double mu = poles_[m];
        w[static_cast<Eigen::Index>(m)] =
            form_ == BetaForm::regularized ? lambda * lambda / (mu - lambda) : mu * mu / (mu - lambda);
    }
    // (B^* W B)_ij = sum_m conj(b^i_m) w_m b^j_m
    MatrixXcd out = static_part_ + lambda * linear_part_ + coeff_.adjoint() * w.cast<cplx>().asDiagonal() * coeff_;
    double p = lambda * lambda;
    for (const auto& t : tail_) {
        out += p * t;
        p *= lambda;
    }
    return out;
}

MatrixXcd BetaMatrix::derivative(double lambda) const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(poles_.size()));
    for (std::size_t m = 0; m < poles_.size(); ++m) {
        const double mu = poles_[m];
        const double d = mu - lambda;
        w[static_cast<Eigen::Index>(m)] =
            form_ == BetaForm::regularized ? lambda * (2.0 * mu - lambda) / (d * d) : mu * mu / (d * d);
    }
    MatrixXcd out = linear_part_ + coeff_.adjoint() * w.cast<cplx>().asDiagonal() * coeff_;
    double p = lambda;
    for (std::size_t k = 0; k < tail_.size(); ++k) {
        out += (static_cast<double>(k) + 2.0) * p * tail_[k];
        p *= lambda;
    }
    return out;
}

BandStructure pure_bloch_bands(const std::vector<BlochDecomposition>& sweep, int m_max, double lambda_max) {
    BandStructure out;
    out.window_max = lambda_max;
    if (sweep.empty()) return out;
    int branches = m_max;
    for (const auto& b : sweep) branches = std::min<int>(branches, static_cast<int>(b.mu.size()));
    for (int m = 0; m < branches; ++m) {
        BranchBand band;
        band.branch = m;
        band.lo = std::numeric_limits<double>::infinity();
        band.hi = -std::numeric_limits<double>::infinity();
        for (const auto& b : sweep) {
            if (b.mu[m] < band.lo) {
                band.lo = b.mu[m];
                band.argmin = b.theta;
            }
            if (b.mu[m] > band.hi) {
                band.hi = b.mu[m];
                band.argmax = b.theta;
            }
        }
        out.branches.push_back(band);
    }
    std::vector<Interval> iv;
    for (const auto& b : out.branches) iv.push_back({b.lo, b.hi});
    std::sort(iv.begin(), iv.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    // edges that agree to roundoff belong to one band
    constexpr double merge_rel = 1e-9;
    for (const auto& i : iv) {
        if (i.lo > lambda_max) break;
        const Interval c{i.lo, std::min(i.hi, lambda_max)};
        if (!out.bands.empty() && c.lo <= out.bands.back().hi + merge_rel * std::max(1.0, std::abs(out.bands.back().hi)))
            out.bands.back().hi = std::max(out.bands.back().hi, c.hi);
        else
            out.bands.push_back(c);
    }
    double cursor = 0.0;
    for (const auto& b : out.bands) {
        if (b.lo > cursor) out.gaps.push_back({cursor, b.lo});
        cursor = std::max(cursor, b.hi);
    }
    // Beyond the last computed branch nothing is known; a trailing gap is only
    // reported up to the last band edge.
    return out;
}

double secular_determinant(const BetaMatrix& beta, const Eigen::Matrix3d& a_hom, const std::array<double, 3>& k,
                           double lambda) {
    MatrixXcd f = -beta(lambda);
    for (int i = 0; i < beta.size(); ++i) {
        const int axis = beta.active()[i];
        f(i, i) += a_hom(axis, axis) * k[axis] * k[axis];
    }
    if (f.rows() == 1) return f(0, 0).real();
    f = (0.5 * (f + f.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(f, Eigen::EigenvaluesOnly);
    return es.eigenvalues().prod();
}

std::vector<SpatialRoot> spatial_spectrum(const BetaMatrix& beta, const Eigen::Matrix3d& a_hom,
                                          const std::vector<std::array<int, 3>>& modes, double lambda_max,
                                          double period, const SpatialOptions& options) {
    if (beta.size() == 0) throw EmptyActiveSetError("spatial spectrum requested for an empty active set");
    const double guard = beta.pole_guard();
    const double mu1 = beta.poles().front();
    const double width = options.bracket_rel * mu1;

    // Scan intervals between distinct poles; the first starts just below 0 so a
    // root at lambda = 0 is bracketed.
    std::vector<double> poles = beta.poles();
    std::sort(poles.begin(), poles.end());
    std::vector<Interval> scan;
    double lo = -guard;
    const double top = std::min({lambda_max, options.truncation_fraction * poles.back(), poles.back() - 2.0 * guard});
    for (double mu : poles) {
        const double hi = std::min(mu - 2.0 * guard, top);
        if (hi > lo) scan.push_back({lo, hi});
        lo = std::max(lo, mu + 2.0 * guard);
        if (lo >= top) break;
    }

    std::vector<SpatialRoot> roots;
    for (const auto& z : modes) {
        const std::array<double, 3> k{kTwoPi * z[0] / period, kTwoPi * z[1] / period, kTwoPi * z[2] / period};
        auto f = [&](double l) { return secular_determinant(beta, a_hom, k, l); };
        for (const auto& iv : scan) {
            const int n = std::max(2, options.samples_per_interval);
            double prev_l = iv.lo, prev_f = f(iv.lo);
            for (int s = 1; s <= n; ++s) {
                // Cosine spacing clusters samples next to the poles.
                const double t = static_cast<double>(s) / n;
                const double l = iv.lo + (iv.hi - iv.lo) * 0.5 * (1.0 - std::cos(M_PI * t));
                const double fl = f(l);
                if ((prev_f < 0.0) != (fl < 0.0) || fl == 0.0) {
                    double a = prev_l, b = l, fa = prev_f;
                    while (b - a > width) {
                        const double mid = 0.5 * (a + b);
                        const double fm = f(mid);
                        if ((fa < 0.0) == (fm < 0.0) && fm != 0.0) {
                            a = mid;
                            fa = fm;
                        } else {
                            b = mid;
                        }
                    }
                    const double root = 0.5 * (a + b);
                    if (root >= -width && root <= lambda_max)
                        roots.push_back({beta.theta(), z, root, std::abs(f(root)), {a, b}});
                }
                prev_l = l;
                prev_f = fl;
            }
        }
    }
    return roots;
}

BandStructure limit_spectrum(const CellGeometry& geom, const Grid& grid, const LimitSpectrumOptions& options) {
    const ThetaGrid tgrid = make_theta_grid(options.g, geom);
    const auto sweep = theta_sweep(geom, grid, tgrid, options.m_max, options.bloch);
    BandStructure out = pure_bloch_bands(sweep, options.m_max, options.lambda_max);
    if (geom.fibers().empty()) return out;

    const Eigen::Matrix3d a_hom = effective_tensor(solve_all_cell_problems(geom, grid));
    for (const auto& b : sweep) {
        if (b.theta.active_set(geom).empty()) continue;
        const LiftSet lifts = solve_lifts(geom, grid, b.theta, b);
        const BetaMatrix beta(lifts, b, options.form, options.pole_guard_rel, options.m_max, options.tail);
        auto roots = spatial_spectrum(beta, a_hom, options.modes, options.lambda_max, options.period, options.spatial);
        out.spatial.insert(out.spatial.end(), roots.begin(), roots.end());
    }
    return out;
}

}  // namespace hcs
