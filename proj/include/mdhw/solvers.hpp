/// @file solvers.hpp
/// @brief Preconditioned conjugate gradients for SPD and consistent SPSD systems.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

namespace mdhw {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

struct CGOptions {
    double rel_tol = 1e-10;
    int max_iter = -1;  // -1: 10 * N
    bool throw_on_failure = true;
    std::string context = "cg";
};

struct CGResult {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

using LinearOp = std::function<void(const VectorXd& x, VectorXd& y)>;

/// Jacobi-preconditioned CG on y = A x. Singular systems are fine when b is
/// in the range; x is used as the initial guess. Throws SolverDivergence on
/// failure unless opts.throw_on_failure is false.
CGResult pcg(const LinearOp& A, const VectorXd& b, VectorXd& x, const VectorXd& inv_diag,
             const CGOptions& opts = {});

CGResult pcg(const SpMat& A, const VectorXd& b, VectorXd& x, const CGOptions& opts = {});

/// Solve A x = b with x fixed on entries where fixed[i] is true (values
/// taken from x on entry). Rows of fixed entries are ignored.
CGResult pcg_dirichlet(const SpMat& A, const VectorXd& b, VectorXd& x, const std::vector<bool>& fixed,
                       const CGOptions& opts = {});

/// Inverse of the diagonal, with 1 where the diagonal vanishes.
VectorXd inverse_diagonal(const SpMat& A);

}  // namespace mdhw
