/// @file harmonic.hpp
/// @brief Harmonic field bases: V_har (Dirichlet potentials q_k) and X_har
/// (cut potentials p_l), Gram-Schmidt orthonormalization and projection.
///
/// The discrete grad q_k is the harmonic 2-form r_k that represents the
/// outward flux through Gamma_k: <r_k, tau>_t = flux(tau, Gamma_k) for every
/// divergence-free 2-form tau. In the continuum this is exactly grad q_k,
/// since <grad q_k, tau> = int_{dOmega} q_k tau.n dS. The P1 potential q_k
/// itself is solved separately from the weighted Laplacian.
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mdhw/fem.hpp"
#include "mdhw/solvers.hpp"

namespace mdhw {

struct HarmonicOptions {
    double rel_tol = 1e-10;  // CG tolerance of every linear solve
};

struct HarmonicBasis {
    double time = 0.0;
    std::vector<FEField> q;             // NodalScalar, q_k = delta_kl on Gamma_l
    std::vector<FEField> grad_q;        // Face 2-forms r_k
    std::vector<FEField> grad_q_nodal;  // NodalVector pushforward of the recovered gradient of q_k
    Eigen::MatrixXd alpha;              // K x K lower triangular, eta_j = sum_k alpha_jk grad_q_k
    std::vector<FEField> eta;           // Face, orthonormal in <.,.>_t
    std::vector<double> q_residuals;    // relative algebraic residuals of the q_k solves

    int K() const { return static_cast<int>(grad_q.size()); }
};

/// Potentials q_k and harmonic 2-forms grad q_k at the time of ops.
HarmonicBasis solve_harmonic_potentials(const ReferenceMesh& m, const WeightedOperators& ops,
                                        const HarmonicOptions& opts = {});
HarmonicBasis solve_harmonic_potentials(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                        const HarmonicOptions& opts = {});

/// Classical Gram-Schmidt on grad_q in the M2 inner product (one extra
/// re-orthogonalization pass when K > 3). Throws DependentBasis when a
/// denominator drops below 1e-12 relative to the norm of its vector.
HarmonicBasis gram_schmidt_vhar(HarmonicBasis basis, const WeightedOperators& ops);

struct VharProjection {
    FEField h;
    VectorXd coeffs;  // <b, eta_k>_t
};

/// h = sum_k <b, eta_k>_t eta_k for a Face field b.
VharProjection project_onto_vhar(const FEField& b, const HarmonicBasis& basis, const WeightedOperators& ops);

/// sum_l alpha_kl flux(b, Gamma_l); equals the projection coefficients for
/// divergence-free b.
VectorXd vhar_flux_coefficients(const FEField& b, const HarmonicBasis& basis, const ReferenceMesh& m,
                                const WeightedOperators& ops);

/// Outward fluxes flux(b, Gamma_l), l = 1..K, of a Face field.
VectorXd boundary_fluxes(const VectorXd& face_dofs, const ReferenceMesh& m, const WeightedOperators& ops);

/// Minimizer omega of |J^{-1} d1 omega - b|_{M2}, i.e. a solution of
/// d1^T M2 d1 omega = J d1^T M2 b (no gauge fixing).
VectorXd curl_preimage(const WeightedOperators& ops, const VectorXd& b, const CGOptions& opts);

/// omega - d0 phi with K0 phi = d0^T M1 omega: the part of omega that is
/// M1-orthogonal to all gradients (weakly divergence-free, zero normal trace).
VectorXd remove_gradient_part(const WeightedOperators& ops, const VectorXd& omega, const CGOptions& opts);

/// Cut potentials. p_l is double-valued across Sigma_l: p_l holds the
/// values on the side nu_l points into, and the copies on the other side
/// carry p_l + 1, so p_l grows by one along a loop crossing Sigma_l once
/// along nu_l. grad_p is the single-valued 1-form with <grad p_l, v>_t =
/// flux(v, Sigma_l) for weakly solenoidal v.
struct CutPotentialBasis {
    double time = 0.0;
    std::vector<FEField> p;         // NodalScalar, front-side values
    std::vector<FEField> grad_p;    // Edge 1-forms
    std::vector<FEField> cocycle;   // Edge, jump cocycle z_l (grad_p = z_l - d0 phi_l)
    std::vector<double> sigma_flux; // flux(grad p_l, Sigma_l) = |grad p_l|_t^2
    std::vector<double> residuals;  // relative algebraic residuals of the Neumann solves
    // back_side[l][t] has bit i set when local vertex i of tet t is a back-side copy on Sigma_{l+1}
    std::vector<std::vector<unsigned char>> back_side;

    int L() const { return static_cast<int>(grad_p.size()); }
};

CutPotentialBasis solve_cut_potentials(const ReferenceMesh& m, const WeightedOperators& ops,
                                       const HarmonicOptions& opts = {});
CutPotentialBasis solve_cut_potentials(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                       const HarmonicOptions& opts = {});

/// Largest deviation of [p_l]_{Sigma_j} from delta_lj over all duplicated nodes.
double cut_jump_defect(const CutPotentialBasis& basis, const ReferenceMesh& m);

/// Weak flux <w, grad p_l>_t of an Edge field through Sigma_l.
double sigma_flux(const FEField& w, int label, const CutPotentialBasis& basis, const WeightedOperators& ops);

/// Relative L2 error of a physical nodal vector field (interleaved) against
/// an analytic field, with linear interpolation inside cells.
double nodal_vector_l2_error(const ReferenceMesh& m, const DomainMotion& motion, double t,
                             const VectorXd& physical_nodal, const VectorFn& exact);

}  // namespace mdhw
