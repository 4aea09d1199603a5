#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "hcs/discrete_ops.hpp"
#include "hcs/errors.hpp"

namespace hcs {

struct HermitianFactor::Impl {
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

HermitianFactor::HermitianFactor(const SpMat& a) : impl_(std::make_unique<Impl>()) {
    impl_->ldlt.compute(a);
    if (impl_->ldlt.info() != Eigen::Success) throw SingularSystemError("LDL^T factorization failed");
}

HermitianFactor::~HermitianFactor() = default;
HermitianFactor::HermitianFactor(HermitianFactor&&) noexcept = default;
HermitianFactor& HermitianFactor::operator=(HermitianFactor&&) noexcept = default;

MatrixXcd HermitianFactor::solve(const MatrixXcd& rhs) const { return impl_->ldlt.solve(rhs); }

double HermitianFactor::pivot_ratio() const {
    const Eigen::VectorXd d = impl_->ldlt.vectorD().cwiseAbs();
    if (d.size() == 0) return 1.0;
    const double mx = d.maxCoeff();
    return mx > 0.0 ? d.minCoeff() / mx : 0.0;
}

namespace {

void remove_mean(VectorXcd& v) {
    if (v.size() > 0) v.array() -= v.mean();
}

double rel_residual(const SpMat& a, const VectorXcd& x, const VectorXcd& rhs) {
    const double nb = rhs.norm();
    const double nr = (rhs - a * x).norm();
    return nb > 0.0 ? nr / nb : nr;
}

LinearSolveResult solve_direct(const SpMat& a, const VectorXcd& rhs, const LinearSolveOptions& opt) {
    LinearSolveResult out;
    if (!opt.mean_zero_gauge) {
        HermitianFactor f(a);
        if (f.pivot_ratio() < 1e-11)
            throw SingularSystemError("matrix is singular to working precision; a gauge condition is required");
        out.x = f.solve(rhs);
        for (int k = 0; k < 3 && rel_residual(a, out.x, rhs) > opt.tol; ++k) out.x += f.solve(rhs - a * out.x);
    } else {
        // Pin the first unknown, then shift to zero mean. Exact for a kernel
        // spanned by constants and a consistent right-hand side.
        const Eigen::Index n = a.rows();
        if (n == 1) {
            out.x = VectorXcd::Zero(1);
        } else {
            SpMat reduced = a.bottomRightCorner(n - 1, n - 1);
            HermitianFactor f(reduced);
            if (f.pivot_ratio() < 1e-11)
                throw SingularSystemError("gauge-reduced matrix is still singular; kernel is larger than constants");
            const VectorXcd b = rhs.tail(n - 1);
            VectorXcd y = f.solve(b);
            for (int k = 0; k < 3; ++k) {
                const VectorXcd r = b - reduced * y;
                if (b.norm() == 0.0 || r.norm() <= 1e-3 * opt.tol * b.norm()) break;
                y += f.solve(r);
            }
            out.x = VectorXcd::Zero(n);
            out.x.tail(n - 1) = y;
            remove_mean(out.x);
        }
    }
    out.relative_residual = rel_residual(a, out.x, rhs);
    return out;
}

LinearSolveResult solve_cg(const SpMat& a, const VectorXcd& rhs, const LinearSolveOptions& opt) {
    const Eigen::Index n = a.rows();
    Eigen::VectorXd inv_diag(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a.coeff(i, i).real();
        if (!(d > 0.0)) throw SingularSystemError("non-positive diagonal entry in CG solve");
        inv_diag[i] = 1.0 / d;
    }
    LinearSolveResult out;
    out.x = VectorXcd::Zero(n);
    VectorXcd r = rhs;
    if (opt.mean_zero_gauge) remove_mean(r);
    const double nb = r.norm();
    if (nb == 0.0) return out;

    VectorXcd z = inv_diag.cwiseProduct(r).cast<cplx>();
    if (opt.mean_zero_gauge) remove_mean(z);
    VectorXcd p = z;
    cplx rz = r.dot(z);
    VectorXcd ap(n);
    for (int it = 1; it <= opt.max_iterations; ++it) {
        ap.noalias() = a * p;
        const cplx alpha = rz / p.dot(ap);
        out.x += alpha * p;
        r -= alpha * ap;
        if (opt.mean_zero_gauge) remove_mean(r);
        out.iterations = it;
        if (r.norm() <= opt.tol * nb) {
            if (opt.mean_zero_gauge) remove_mean(out.x);
            out.relative_residual = rel_residual(a, out.x, rhs);
            if (out.relative_residual <= opt.tol * 10.0) return out;
            // Recursive residual drifted; restart from the true residual.
            r = rhs - a * out.x;
            if (opt.mean_zero_gauge) remove_mean(r);
        }
        z = inv_diag.cwiseProduct(r).cast<cplx>();
        if (opt.mean_zero_gauge) remove_mean(z);
        const cplx rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    std::ostringstream os;
    os << "CG did not reach relative residual " << opt.tol << " in " << opt.max_iterations
       << " iterations (residual " << r.norm() / nb << ")";
    throw ConvergenceError(os.str());
}

}  // namespace

LinearSolveResult linear_solve(const SparseOperator& a, const VectorXcd& rhs, const LinearSolveOptions& options) {
    if (a.dim() != rhs.size()) throw ValidationError("linear_solve: dimension mismatch");
    if (a.dim() == 0) return {};
    VectorXcd b = rhs;
    if (options.mean_zero_gauge) remove_mean(b);
    LinearSolveResult out =
        a.dim() <= options.direct_limit ? solve_direct(a.matrix, b, options) : solve_cg(a.matrix, b, options);
    if (out.relative_residual > options.tol) {
        std::ostringstream os;
        os << "linear solve residual " << out.relative_residual << " exceeds tolerance " << options.tol;
        throw ConvergenceError(os.str());
    }
    return out;
}

}  // namespace hcs
