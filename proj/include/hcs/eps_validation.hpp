#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "hcs/bloch.hpp"
#include "hcs/discrete_ops.hpp"
#include "hcs/geometry.hpp"

namespace hcs {

/// theta-quasi-periodic cell profile g(y), y in R^3.
using CellFunction = std::function<cplx(const Point&)>;
/// Macroscopic test field phi(x) on the torus (0,1)^3.
using MacroFunction = std::function<cplx(const Point&)>;

/// Forcing f_eps(x) = exp(i k.x) g(x / eps) on the torus with K^3 cells,
/// eps = 1/K, each cell resolved by the cell grid.
struct EpsProblem {
    int K = 4;
    QuasiMomentum theta;          ///< quasi-momentum of g; K theta_j must be a multiple of 2 pi
    std::array<int, 3> mode{};    ///< k = 2 pi mode
    CellFunction profile;         ///< empty: g = 1
    bool contrast = true;         ///< false: soft coefficient a0 without the eps^2 factor
    int budget = 128;             ///< limit on K p per axis
    LinearSolveOptions solver{.direct_limit = 4096};
};

struct EpsField {
    int K = 0;
    int p = 0;
    Lattice lattice{1};
    std::vector<double> coeff;
    std::vector<bool> stiff;
    VectorXcd f, u;
    double residual = 0.0;
    int iterations = 0;
};

/// Node coefficients of the composite (K p)^3 lattice: a1 on stiff nodes,
/// eps^2 a0 (or a0 without contrast) on soft nodes.
std::vector<double> eps_coefficients(const CellGeometry& geom, const Grid& cell, int K, bool contrast,
                                     std::vector<bool>* stiff = nullptr);

/// Solves (A_eps + I) u = f_eps on the torus. Throws BudgetError when K p
/// exceeds the budget, ConvergenceError on solver failure.
EpsField solve_eps(const CellGeometry& geom, const Grid& cell, const EpsProblem& prob);

/// Relative defect of <a grad u, grad u> + ||u||^2 = Re <f, u>.
double energy_identity_defect(const EpsField& field);

struct AprioriNorms {
    double stiff_gradient = 0.0;   ///< ||sqrt(a1) grad u|| on the stiff phase
    double scaled_gradient = 0.0;  ///< ||eps grad u||
    double l2 = 0.0;               ///< ||u||
    double forcing = 0.0;          ///< ||f||
};

AprioriNorms apriori_norms(const EpsField& field);

/// Constant C with every a priori norm <= C ||f|| (from the energy identity).
double apriori_constant(const CellGeometry& geom, int K, bool contrast);

/// Two-scale limit u(x, y) = exp(i k.x) w(y) of the contrast problem.
struct HomogenizedField {
    QuasiMomentum theta;
    std::array<int, 3> mode{};
    VectorXcd w;                    ///< on all cell nodes; constant on active stiff components, zero on inactive ones
    std::vector<int> components;    ///< active stiff owners (fiber axes, kHostOwner)
    std::vector<cplx> component_values;
    double residual = 0.0;
};

/// Bordered Hermitian system: soft unknowns plus one constant per active stiff
/// component, with macro term k^T A^hom k on the components.
HomogenizedField solve_homogenized(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                   const std::array<int, 3>& mode, const CellFunction& profile);

/// H^3 sum_X u(X) conj(phi(X) psi(X/eps)); psi given on cell nodes and
/// extended with the phase exp(i theta.c) to cell c.
cplx two_scale_pairing(const EpsField& field, const MacroFunction& phi, const VectorXcd& psi,
                       const QuasiMomentum& theta);

/// Limit value int_Omega int_Q u conj(phi psi), macro part by the composite midpoint rule of `field`.
cplx limit_pairing(const HomogenizedField& limit, const EpsField& field, const MacroFunction& phi,
                   const VectorXcd& psi);

/// ||phi psi(./eps)|| on the composite lattice.
double test_norm(const EpsField& field, const MacroFunction& phi, const VectorXcd& psi, const QuasiMomentum& theta);

struct PairingTest {
    std::string name;
    MacroFunction phi;
    VectorXcd psi;  ///< on cell nodes
};

/// Battery: phi in {e^{ik.x}, e^{ik.x}(1 + cos(2 pi x_2)/2)} times psi in
/// {v^(1), v^(2), b^(i) for i in I_theta, 1 on theta = 0}.
std::vector<PairingTest> default_battery(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                         const std::array<int, 3>& mode);

struct ReportOptions {
    std::vector<int> Ks{4, 8};
    double threshold = 0.1;   ///< final normalized residual bound
    double slack = 0.1;       ///< allowed relative increase between consecutive eps
    int budget = 128;
    LinearSolveOptions solver{.direct_limit = 4096};
};

struct EpsRow {
    int K = 0;
    std::vector<double> residuals;  ///< normalized, per battery test
    std::vector<cplx> pairings, limits;
    AprioriNorms norms;
    double energy_defect = 0.0;
    double solve_residual = 0.0;
    int iterations = 0;
};

struct TwoScaleReport {
    QuasiMomentum theta;
    std::array<int, 3> mode{};
    std::vector<std::string> tests;
    std::vector<EpsRow> rows;
    double apriori_bound = 0.0;  ///< C
    bool apriori_pass = false;
    bool monotone_pass = false;
    bool threshold_pass = false;
    bool pass = false;
};

TwoScaleReport convergence_report(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta,
                                  const std::array<int, 3>& mode, const CellFunction& profile,
                                  const ReportOptions& options = {});

/// Default profile exp(i theta.y) (1 + cos(2 pi y_2) / 2).
CellFunction default_profile(const QuasiMomentum& theta);

/// Spectrum of the discrete A_eps on the torus (with contrast), assembled as
/// the union of its Floquet blocks at theta = 2 pi j / K. Ascending, with multiplicity.
std::vector<double> eps_spectrum(const CellGeometry& geom, const Grid& cell, int K, int threads = 1);

struct SpectralSpotCheck {
    QuasiMomentum theta_star;
    double lambda_star = 0.0;
    std::vector<int> Ks;
    std::vector<double> distance;  ///< dist(lambda*, sigma(A_eps)) per K
    std::vector<double> nearest;
    bool pass = false;             ///< distance strictly decreasing
};

/// lambda* = mu^(1) at theta*; checks dist(lambda*, sigma(A_eps)) decreases along Ks.
SpectralSpotCheck spectral_spot_check(const CellGeometry& geom, const Grid& cell, const QuasiMomentum& theta_star,
                                      const std::vector<int>& Ks, int threads = 1);

}  // namespace hcs
