#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hcs/discrete_ops.hpp"
#include "hcs/errors.hpp"

namespace hcs {

namespace {

// Appends the columns of w to the orthonormal basis v (classical Gram-Schmidt,
// applied twice); columns that lose rank are dropped. Returns the number kept.
Eigen::Index extend_basis(MatrixXcd& v, Eigen::Index used, const MatrixXcd& w) {
    Eigen::Index kept = 0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
        if (used + kept >= v.cols()) break;
        VectorXcd x = w.col(c);
        const double start = x.norm();
        if (start == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            const auto basis = v.leftCols(used + kept);
            x -= basis * (basis.adjoint() * x);
        }
        const double nx = x.norm();
        if (nx <= 1e-10 * start) continue;
        v.col(used + kept) = x / nx;
        ++kept;
    }
    return kept;
}

void fix_phase(Eigen::Ref<VectorXcd> v) {
    double best = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) best = std::max(best, std::abs(v[i]));
    if (best == 0.0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) >= best * (1.0 - 1e-10)) {
            v *= std::conj(v[i]) / std::abs(v[i]);
            v[i] = std::abs(v[i]);
            return;
        }
    }
}

EigenDecomposition finish(const SpMat& c, const Eigen::VectorXd& scale, const Eigen::VectorXd& values,
                          const MatrixXcd& ritz, int m, int iterations) {
    EigenDecomposition out;
    out.iterations = iterations;
    out.eigenvectors.resize(ritz.rows(), m);
    const MatrixXcd cr = c * ritz.leftCols(m);
    for (int k = 0; k < m; ++k) {
        const double mu = values[k];
        out.eigenvalues.push_back(mu);
        out.residuals.push_back((cr.col(k) - mu * ritz.col(k)).norm() / std::max(1.0, std::abs(mu)));
        out.eigenvectors.col(k) = (ritz.col(k).array() * scale.array().cast<cplx>()).matrix();
        fix_phase(out.eigenvectors.col(k));
    }
    return out;
}

EigenDecomposition dense_solve(const SpMat& c, const Eigen::VectorXd& scale, int m) {
    const MatrixXcd dense = MatrixXcd(c);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(dense);
    if (es.info() != Eigen::Success) throw ConvergenceError("dense Hermitian eigensolver failed");
    return finish(c, scale, es.eigenvalues(), es.eigenvectors(), m, 0);
}

}  // namespace

EigenDecomposition eigensolve(const SparseOperator& a, const SparseOperator& m, int m_max,
                              const EigenOptions& options) {
    const Eigen::Index n = a.dim();
    if (m.dim() != n) throw ValidationError("eigensolve: pencil dimensions differ");
    if (m_max < 1 || m_max > n) throw ValidationError("eigensolve: need 1 <= m_max <= dimension");

    // Reduce to the standard problem C x = mu x with C = M^-1/2 A M^-1/2.
    Eigen::VectorXd scale(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = m.matrix.coeff(i, i).real();
        if (!(d > 0.0)) throw ValidationError("eigensolve: mass matrix must be positive diagonal");
        scale[i] = 1.0 / std::sqrt(d);
    }
    const SpMat c = scale.cast<cplx>().asDiagonal() * a.matrix * scale.cast<cplx>().asDiagonal();

    if (n <= options.dense_threshold || 4 * m_max >= n) return dense_solve(c, scale, m_max);

    double mean_diag = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean_diag += std::abs(c.coeff(i, i));
    mean_diag /= static_cast<double>(n);
    const double delta = 1e-6 * std::max(mean_diag, 1e-300);
    SpMat shifted = c;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += delta;
    const HermitianFactor factor(shifted);

    const Eigen::Index block = std::min<Eigen::Index>(n, m_max + 6);
    const int steps = 5;
    const Eigen::Index cap = std::min<Eigen::Index>(n, block * (steps + 1));

    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXcd start(n, block);
    for (Eigen::Index j = 0; j < block; ++j)
        for (Eigen::Index i = 0; i < n; ++i) start(i, j) = cplx(normal(rng), normal(rng));

    MatrixXcd basis(n, cap);
    Eigen::VectorXd values;
    MatrixXcd ritz;
    double worst = 0.0;
    for (int restart = 0; restart < options.max_restarts; ++restart) {
        Eigen::Index used = extend_basis(basis, 0, start);
        Eigen::Index block_begin = 0, block_size = used;
        for (int s = 0; s < steps && used < cap && block_size > 0; ++s) {
            const MatrixXcd w = factor.solve(basis.middleCols(block_begin, block_size));
            const Eigen::Index kept = extend_basis(basis, used, w);
            block_begin = used;
            block_size = kept;
            used += kept;
        }
        const auto v = basis.leftCols(used);
        const MatrixXcd cv = c * v;
        MatrixXcd proj = v.adjoint() * cv;
        proj = (0.5 * (proj + proj.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(proj);
        values = es.eigenvalues();
        ritz = v * es.eigenvectors();
        const MatrixXcd cr = cv * es.eigenvectors().leftCols(m_max);

        worst = 0.0;
        for (int k = 0; k < m_max; ++k) {
            const double mu = values[k];
            const double res = (cr.col(k) - mu * ritz.col(k)).norm() / std::max(1.0, std::abs(mu));
            worst = std::max(worst, res);
        }
        if (worst <= options.tol) return finish(c, scale, values, ritz, m_max, restart + 1);
        start = ritz.leftCols(std::min(block, used));
    }
    if (n <= options.dense_fallback_limit) return dense_solve(c, scale, m_max);
    std::ostringstream os;
    os << "eigensolve: residual " << worst << " above tolerance " << options.tol << " after "
       << options.max_restarts << " restarts (dimension " << n << ", m_max " << m_max << ")";
    throw ConvergenceError(os.str());
}

}  // namespace hcs
