#pragma once

#include <array>
#include <vector>

#include "hcs/bloch.hpp"
#include "hcs/cell_problems.hpp"
#include "hcs/discrete_ops.hpp"

namespace hcs {

/// a0-harmonic lifts b^(i) of the fiber indicators, one per i in I_theta,
/// and their expansion against a Bloch eigenbasis.
struct LiftSet {
    QuasiMomentum theta;
    std::vector<int> active;          ///< axes in I_theta, ascending
    MatrixXcd values;                 ///< soft dofs x |I_theta|
    MatrixXcd full;                   ///< lattice nodes x |I_theta| (fiber values included)
    MatrixXcd coefficients;           ///< m x |I_theta|, b^(i)_m = <b^(i), v^(m)>
    MatrixXcd energy;                 ///< E_ij = q(b^(j), b^(i))
    MatrixXcd gram;                   ///< G_ij = <b^(j), b^(i)> on Q_0
    std::vector<double> fiber_measure;  ///< discrete |C_i|
    /// Resolvent moments R_k(i,j) = <B_theta^{-k} b^(j), b^(i)> = sum_m conj(b^i_m) b^j_m / mu_m^k
    /// over the full basis; entry k-1 holds R_k.
    std::vector<MatrixXcd> moments;
    double residual = 0.0;            ///< max relative residual of the harmonic solves
};

/// Throws EmptyActiveSetError when I_theta is empty (the spatial operator is
/// the zero map there).
LiftSet solve_lifts(const CellGeometry& geom, const Grid& grid, const QuasiMomentum& theta,
                    const BlochDecomposition& bloch, int moments = 6);

/// Discrete flux T_j(v) = q(v, b^(j)) - <A_0 v, b^(j)> for a soft field v
/// (zero on the stiff nodes). `a0` is the weak B_theta operator on `soft`.
cplx flux(const Grid& grid, const SoftPhase& soft, const SparseOperator& a0, const QuasiMomentum& theta,
          const VectorXcd& v, const VectorXcd& lift_full);

/// Evaluation route for beta(lambda).
enum class BetaForm {
    /// lambda (|C_i| delta_ij + G_ij) - E_ij + lambda^2 sum_m conj(b^i_m) b^j_m / (mu_m - lambda).
    /// Algebraically the full-eigenbasis pole sum with its divergent constant
    /// part replaced by the lift energy; converges under truncation.
    regularized,
    /// lambda |C_i| delta_ij + sum_{m <= m_max} mu_m^2 / (mu_m - lambda) b^j_m conj(b^i_m), truncated as written.
    pole_sum,
};

/// Tail of the regularized sum beyond m_max, expanded in powers of
/// lambda / mu_m with exact resolvent moments.
enum class TailCorrection { none, static_moments };

class BetaMatrix {
public:
    /// Uses the first `m_max` eigenpairs (all when m_max < 0). The tail
    /// correction applies to the regularized form only.
    BetaMatrix(const LiftSet& lifts, const BlochDecomposition& bloch, BetaForm form = BetaForm::regularized,
               double pole_guard_rel = 1e-6, int m_max = -1, TailCorrection tail = TailCorrection::static_moments);

    /// |I_theta| x |I_theta| Hermitian matrix. Throws PoleProximityError
    /// within the pole guard of a pole.
    MatrixXcd operator()(double lambda) const;
    MatrixXcd derivative(double lambda) const;

    const QuasiMomentum& theta() const { return theta_; }
    const std::vector<int>& active() const { return active_; }
    int size() const { return static_cast<int>(active_.size()); }
    const std::vector<double>& poles() const { return poles_; }
    int truncation() const { return static_cast<int>(poles_.size()); }
    double pole_guard() const { return guard_; }
    bool near_pole(double lambda) const;
    BetaForm form() const { return form_; }

private:
    QuasiMomentum theta_;
    std::vector<int> active_;
    std::vector<double> poles_;
    MatrixXcd coeff_;  // m x k
    Eigen::MatrixXcd static_part_;  // regularized: -E
    Eigen::MatrixXcd linear_part_;  // regularized: diag|C| + G ; pole_sum: diag|C|
    std::vector<MatrixXcd> tail_;  // coefficient of lambda^(k+2) for k = 0, 1, ...
    BetaForm form_;
    double guard_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct BranchBand {
    int branch = 0;
    double lo = 0.0, hi = 0.0;
    QuasiMomentum argmin, argmax;
};

struct SpatialRoot {
    QuasiMomentum theta;
    std::array<int, 3> mode{};  ///< integer triple z, k = 2 pi z / L
    double lambda = 0.0;
    double residual = 0.0;      ///< |F_k(lambda)|
    Interval bracket;
};

struct BandStructure {
    std::vector<BranchBand> branches;
    std::vector<Interval> bands;  ///< merged branch intervals clipped to the window
    std::vector<Interval> gaps;   ///< complement of `bands` in [0, window_max]
    std::vector<SpatialRoot> spatial;
    double window_max = 0.0;
};

/// Per-branch [min, max] over the sweep, merged into maximal bands; gaps
/// within [0, lambda_max].
BandStructure pure_bloch_bands(const std::vector<BlochDecomposition>& sweep, int m_max, double lambda_max);

struct SpatialOptions {
    int samples_per_interval = 400;
    /// Bisection stops at bracket width <= bracket_rel * mu^(1).
    double bracket_rel = 1e-10;
    /// The scan ends at truncation_fraction * mu^(m_max), where the tail
    /// expansion of the truncated sum is still accurate.
    double truncation_fraction = 0.5;
};

/// F_k(lambda) = det(diag(a_hom_i k_i^2) - beta(lambda)) on the active block.
double secular_determinant(const BetaMatrix& beta, const Eigen::Matrix3d& a_hom, const std::array<double, 3>& k,
                           double lambda);

/// Certified sign-change roots of F_k in [0, lambda_max] for each mode.
/// The scan stops at options.truncation_fraction times the last retained
/// pole. Throws EmptyActiveSetError for an empty active block.
std::vector<SpatialRoot> spatial_spectrum(const BetaMatrix& beta, const Eigen::Matrix3d& a_hom,
                                          const std::vector<std::array<int, 3>>& modes, double lambda_max,
                                          double period, const SpatialOptions& options = {});

struct LimitSpectrumOptions {
    int g = 4;
    int m_max = 10;
    double lambda_max = 200.0;
    std::vector<std::array<int, 3>> modes{{0, 0, 0}, {1, 0, 0}};
    double period = 1.0;
    BetaForm form = BetaForm::regularized;
    TailCorrection tail = TailCorrection::static_moments;
    double pole_guard_rel = 1e-6;
    SpatialOptions spatial;
    BlochOptions bloch;
};

/// Pure Bloch bands over the theta grid plus spatial roots at every grid
/// point with a nonempty active set.
BandStructure limit_spectrum(const CellGeometry& geom, const Grid& grid, const LimitSpectrumOptions& options);

}  // namespace hcs
