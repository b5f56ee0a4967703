/// @file galerkin.hpp
/// @brief Time-dependent Galerkin scheme for time-periodic flow in a moving shell.
///
/// The basis Upsilon_k = curl(B(r) P_k(y)), B = (r - rho1)^2 (rho0 - r)^2, is
/// fixed on the reference shell rho1 < |y| < rho0; it is divergence free and
/// vanishes on both spheres. psi_k(t) is its
/// Schmidt orthonormalization in <.,.>_t. All inner products are evaluated on
/// the physical fields (x = phi_inv(y, t), u = A u tilde), where <.,.>_t and
/// <grad_g ., grad_g .>_t reduce to the Euclidean L2 and H1 products.
#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "mdhw/cutoff.hpp"
#include "mdhw/harmonic.hpp"

namespace mdhw {

/// 3^{-1/2} 2^{2/3} pi^{-2/3}, the sharp constant of H^1_0 into L^6.
double sobolev_constant();

struct ShellQuadrature {
    double rho1 = 1.0, rho0 = 2.0;
    std::vector<Vec3> points;
    std::vector<double> weights;  // reference volume weights
};

/// Gauss-Legendre in r and cos(theta), trapezoid in the azimuth.
ShellQuadrature make_shell_quadrature(double rho1, double rho0, int n_r = 8, int n_theta = 8, int n_phi = 16);

constexpr int kMaxShellModes = 20;

struct ShellBasis {
    int m = 0;
    std::vector<std::string> labels;
    // per quadrature point and mode: reference value and Jacobian (i, k) = dU^i / dy^k
    std::vector<std::vector<Vec3>> value;
    std::vector<std::vector<Mat3>> jacobian;
};

/// Potentials: curl(B P_k) for the first m of a fixed list of constant,
/// linear and quadratic P_k. Ritz: the m lowest Ritz vectors of the Stokes
/// problem on the reference shell in the span of curl(B y^a e_i), |a| <= 3,
/// so that truncation to the leading modes keeps the low end of the spectrum.
enum class BasisOrdering { Ritz, Potentials };

int max_shell_modes(BasisOrdering ordering);

/// Throws BadParameters if m is outside [1, max_shell_modes(ordering)].
ShellBasis make_shell_basis(const ShellQuadrature& q, int m, BasisOrdering ordering = BasisOrdering::Ritz);

/// A physical vector field with its spatial Jacobian (i, j) = dv^i/dx^j and t-derivative.
struct SpaceTimeField {
    std::function<Vec3(const Vec3&, double)> value;
    std::function<Mat3(const Vec3&, double)> grad;
    std::function<Vec3(const Vec3&, double)> dt;
};

SpaceTimeField zero_field();
/// c x / |x|^3 with outward flux Phi through the inner sphere (normal -x/|x|),
/// i.e. c = -Phi / (4 pi). Harmonic and curl free.
SpaceTimeField radial_lift(double flux);
/// amplitude * ((1 + sin wt / 2)(-x2, x1, 0) + (cos wt / 2)(0, -x3, x2)), w = 2 pi / period.
SpaceTimeField swirl_forcing(double amplitude, double period);
/// amplitude * (-x2, x1, 0), constant in time.
SpaceTimeField steady_swirl(double amplitude);

struct GalerkinProblem {
    MotionPtr motion;  // maps Omega(t) onto the reference shell
    double period = 1.0;
    int m = 16;
    int steps = 128;  // RK4 steps per period
    double rho1 = 1.0, rho0 = 2.0;
    int n_r = 8, n_theta = 8, n_phi = 16;
    SpaceTimeField lift = zero_field();
    SpaceTimeField forcing = zero_field();
    // which parts of the right-hand side enter; Stokes-only runs switch off the convection
    bool convection = true;
    BasisOrdering ordering = BasisOrdering::Ritz;
};

struct Orthonormalization {
    Eigen::MatrixXd mu;      // lower triangular, psi = mu Upsilon
    Eigen::MatrixXd mu_dot;  // t-derivative from the Gram rate
};

/// G = L L^T, mu = L^{-1}, mu_dot = -mu Ldot mu. Throws DependentBasis if the
/// condition number of G exceeds 1e12.
Orthonormalization orthonormalize_basis_at(const Eigen::MatrixXd& G, const Eigen::MatrixXd& G_dot);

/// All time-dependent coefficients of the Galerkin system at one stage time,
/// in the orthonormal basis psi(t).
struct StageData {
    double t = 0.0;
    Eigen::MatrixXd G;       // Gram matrix of Upsilon
    Orthonormalization orth;
    Eigen::MatrixXd C;       // (d/dt psi_j, psi_k), antisymmetric
    Eigen::MatrixXd S;       // (grad psi_j, grad psi_k)
    Eigen::MatrixXd conv;    // (k, j): skew N[b, psi_j] + N[psi_j, b] tested with psi_k
    Eigen::MatrixXd A;       // hdot = A h + quad(h) + F
    std::vector<double> Q;   // (k, j, l) -> Q[(k m + j) m + l]
    Eigen::VectorXd F;       // weak forcing (F tilde, psi_k)
    double F_dual_sq = 0.0;  // F^T S^{-1} F
    double lift_L3 = 0.0;    // |b|_{L3(Omega(t))}
    double lambda_min = 0.0; // smallest eigenvalue of S
    double orth_defect = 0.0; // max |<psi_j, psi_k>_t - delta_jk|
};

StageData assemble_stage(const GalerkinProblem& p, const ShellQuadrature& q, const ShellBasis& basis, double t);

/// Stage data cached at t_start + i dt / 2, i = 0..2 steps.
class GalerkinSystem {
public:
    explicit GalerkinSystem(GalerkinProblem p, double t_start = 0.0);

    const GalerkinProblem& problem() const { return p_; }
    int m() const { return p_.m; }
    int steps() const { return p_.steps; }
    double dt() const { return p_.period / p_.steps; }
    double t_start() const { return t0_; }
    const StageData& stage(int i) const { return stages_.at(i); }
    int num_stages() const { return static_cast<int>(stages_.size()); }
    const ShellQuadrature& quadrature() const { return quad_; }
    const ShellBasis& basis() const { return basis_; }

    Eigen::VectorXd rhs(const Eigen::VectorXd& h, int stage) const;

private:
    GalerkinProblem p_;
    double t0_;
    ShellQuadrature quad_;
    ShellBasis basis_;
    std::vector<StageData> stages_;
};

struct EnergyStep {
    double t = 0.0;
    double kinetic = 0.0;      // |u(t)|^2 / 2 at the end of the step
    double dissipation = 0.0;  // int |grad u|^2 over the step
    double convective = 0.0;   // int (u . grad b, u) over the step
    double source = 0.0;       // int (F, u) over the step
    double edi_defect = 0.0;   // |kinetic change + dissipation + convective - source|
    double bound_K = 0.0;      // int 2K over the step, 2K = |F|_*^2 / (1 - margin)
};

struct TrajectoryState {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> h;  // coefficients at the step times
    std::vector<EnergyStep> energy;
    double max_edi_defect = 0.0;
    double max_antisymmetry_defect = 0.0;  // max |C + C^T|: the two ways of writing d/dt |u|^2
    int iterate_index = 0;
};

/// RK4 over `periods` periods (the cache is reused, so the data must be
/// periodic when periods > 1). margin enters the ledger bound K only.
/// Throws BlowupDetected when the kinetic energy exceeds 1e6 (|a|^2 + int 2K + 1).
TrajectoryState integrate(const GalerkinSystem& sys, const Eigen::VectorXd& a, int periods = 1, double margin = 0.0);

/// The Poincare map a -> h(T).
Eigen::VectorXd poincare_map(const GalerkinSystem& sys, const Eigen::VectorXd& a);

struct BallRadius {
    double R = 0.0;
    double gamma = 0.0;       // (1 - margin) lambda_min
    double margin = 0.0;      // C_s max_t |b|_{L3}
    double lambda_min = 0.0;  // min over stages of the discrete Dirichlet Rayleigh quotient
    double multiplier = 0.0;  // 1 / (1 - margin), the Young constant logged for K
    double integral_2K = 0.0;
};

/// R^2 (1 - e^{-gamma T}) = int_0^T e^{-gamma (T - tau)} 2K(tau) dtau. Throws
/// BadParameters when the margin is not below 1.
BallRadius ball_radius(const GalerkinSystem& sys);

struct SmallnessReport {
    double margin = 0.0;  // sup_t C_s |h_beta(t)|_{L3}
    bool pass = false;
    std::vector<double> times, l3_norms;
};

/// Margin of the analytic lift on the quadrature of the system.
SmallnessReport check_smallness(const GalerkinSystem& sys);

/// |c x / |x|^3|_{L3} on R1 < |x| < R0 for flux Phi: 2^{-4/3} 3^{-1/3} pi^{-2/3} (R1^{-3} - R0^{-3})^{1/3} |Phi|.
double annulus_l3_closed_form(double R1, double R0, double flux);
/// The same expression with the prefactor 2^{-2/3}; larger by 2^{2/3}.
double annulus_l3_printed(double R1, double R0, double flux);

/// FE margin: h_beta(t) = sum_kl alpha_kl flux_l eta_k on the mesh at each time.
SmallnessReport check_smallness(const ReferenceMesh& m, const DomainMotion& motion, const std::vector<double>& times,
                                const Eigen::VectorXd& fluxes);

/// |h|_{L3(Omega(t))} of a Face field.
double face_field_l3(const ReferenceMesh& m, const DomainMotion& motion, double t, const VectorXd& dofs);

struct FixedPointOptions {
    int max_iters = 50;
    double tol = 1e-6;
    double damping = 0.5;
    int anderson_depth = 3;
    double stall_ratio = 0.7;  // Picard is replaced by Anderson when a step reduces the residual less
    bool throw_on_failure = false;
};

struct PeriodicResult {
    Eigen::VectorXd a;
    TrajectoryState trajectory;
    std::vector<double> residual_history;  // |P(a_n) - a_n|
    std::vector<double> iterate_norms;     // |a_n|
    std::vector<double> image_norms;       // |P(a_n)|
    std::vector<std::string> method;       // "picard" or "anderson" per iteration
    double ball_R = 0.0;
    bool ball_ok = true;  // every |a_n| <= R implied |P(a_n)| <= R (1 + 1e-3)
    bool converged = false;
};

PeriodicResult find_periodic(const GalerkinSystem& sys, const Eigen::VectorXd& a0, double R,
                             const FixedPointOptions& opts = {});

/// Steady Galerkin solution of A h + quad(h) + F = 0 at stage 0 by Newton.
Eigen::VectorXd steady_solution(const GalerkinSystem& sys, double tol = 1e-13, int max_iters = 50);

// ---- solenoidal extension on the FE mesh ----

struct BEpsilonOptions {
    double rel_tol = 1e-11;
    double gfc_tol = 1e-8;  // relative total-flux tolerance
};

struct BEpsilon {
    FEField b_ext;     // Face, least M2-norm solenoidal extension of the normal trace
    FEField h;         // Face
    FEField w;         // Edge
    FEField rot_part;  // Face, J^{-1} d1 (theta w)
    FEField b_eps;     // Face, h + rot_part
    VectorXd coeffs_h;
    double trace_error = 0.0;  // max boundary-face |b_eps - beta| / max |beta|
    double div_defect = 0.0;   // max |d2 b_eps| / max |beta|
};

/// Face dofs of the normal trace of beta on boundary faces, zero elsewhere.
VectorXd boundary_trace(const ReferenceMesh& m, const DomainMotion& motion, double t, const VectorFn& beta);

/// b_eps = h + Rot[theta, w] for the extension of the boundary data.
/// Throws FluxViolation when the total outward flux does not vanish.
BEpsilon build_b_epsilon(const ReferenceMesh& m, const WeightedOperators& ops, const VectorXd& beta_trace,
                         const HarmonicBasis& basis, const CutPotentialBasis& cuts, const CutoffProfile& theta,
                         const BEpsilonOptions& opts = {});

}  // namespace mdhw
