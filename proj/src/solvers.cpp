#include "mdhw/solvers.hpp"

#include <cmath>
#include <sstream>

#include "mdhw/errors.hpp"

namespace mdhw {

VectorXd inverse_diagonal(const SpMat& A) {
    VectorXd d = A.diagonal();
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = (d[i] > 0.0) ? 1.0 / d[i] : 1.0;
    return d;
}

CGResult pcg(const LinearOp& A, const VectorXd& b, VectorXd& x, const VectorXd& inv_diag,
             const CGOptions& opts) {
    const Eigen::Index n = b.size();
    if (x.size() != n) x = VectorXd::Zero(n);
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * n);
    CGResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        res.converged = true;
        return res;
    }
    VectorXd r(n), z(n), p(n), Ap(n);
    A(x, Ap);
    r = b - Ap;
    z = inv_diag.cwiseProduct(r);
    p = z;
    double rz = r.dot(z);
    res.rel_residual = r.norm() / bnorm;
    while (res.rel_residual > opts.rel_tol && res.iterations < max_iter) {
        A(p, Ap);
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rz / pAp;
        x += alpha * p;
        r -= alpha * Ap;
        ++res.iterations;
        // recompute the true residual now and then to avoid drift
        if (res.iterations % 200 == 0) {
            A(x, Ap);
            r = b - Ap;
        }
        res.rel_residual = r.norm() / bnorm;
        z = inv_diag.cwiseProduct(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
    }
    res.converged = res.rel_residual <= opts.rel_tol;
    if (!res.converged && opts.throw_on_failure) {
        std::ostringstream os;
        os << opts.context << ": relative residual " << res.rel_residual << " after " << res.iterations
           << " iterations (tolerance " << opts.rel_tol << ")";
        throw SolverDivergence(os.str());
    }
    return res;
}

CGResult pcg(const SpMat& A, const VectorXd& b, VectorXd& x, const CGOptions& opts) {
    const VectorXd dinv = inverse_diagonal(A);
    return pcg([&](const VectorXd& v, VectorXd& y) { y.noalias() = A * v; }, b, x, dinv, opts);
}

CGResult pcg_dirichlet(const SpMat& A, const VectorXd& b, VectorXd& x, const std::vector<bool>& fixed,
                       const CGOptions& opts) {
    const Eigen::Index n = b.size();
    VectorXd xb = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (fixed[i]) xb[i] = x[i];
    VectorXd rhs = b - A * xb;
    for (Eigen::Index i = 0; i < n; ++i)
        if (fixed[i]) rhs[i] = 0.0;
    VectorXd dinv = inverse_diagonal(A);
    for (Eigen::Index i = 0; i < n; ++i)
        if (fixed[i]) dinv[i] = 0.0;
    VectorXd tmp(n);
    auto op = [&](const VectorXd& v, VectorXd& y) {
        tmp = v;
        for (Eigen::Index i = 0; i < n; ++i)
            if (fixed[i]) tmp[i] = 0.0;
        y.noalias() = A * tmp;
        for (Eigen::Index i = 0; i < n; ++i)
            if (fixed[i]) y[i] = 0.0;
    };
    VectorXd xi = x;
    for (Eigen::Index i = 0; i < n; ++i)
        if (fixed[i]) xi[i] = 0.0;
    CGResult r = pcg(op, rhs, xi, dinv, opts);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = fixed[i] ? xb[i] : xi[i];
    return r;
}

}  // namespace mdhw
