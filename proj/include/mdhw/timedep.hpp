/// @file timedep.hpp
/// @brief Time derivatives of the decomposition at an anchor time t0.
///
/// All fields live on Omega(t0) through the composite chart anchored at t0
/// (identity at t = t0). The dotted equations are the exact t-derivatives
/// of the discrete problems, so finite differences of solutions at t0 + eps
/// converge to them at rate O(eps). Operators must be assembled with rates.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mdhw/decomposition.hpp"

namespace mdhw {

struct AnchorFrame {
    MotionPtr base;
    double t0 = 0.0;
    std::shared_ptr<const AnchoredMotion> motion;
    ReferenceMesh mesh;  // vertices moved to Omega(t0)
};

AnchorFrame make_anchor(const ReferenceMesh& ref, MotionPtr base, double t0);

/// Weak form of the rate of the Laplacian: d/dt(K0 / J) q, the kernel
/// being int G^{ij} dq/dx^i dv/dx^j with G^{ij} = dg^{ij}/dt.
VectorXd ldot_apply(const WeightedOperators& ops, const VectorXd& q);

struct TimedepOptions {
    double rel_tol = 1e-12;
    double data_step = 1e-3;  // step of the central difference of data families
};

/// (K0/J) qdot = -ldot(q) inside, qdot = 0 on the boundary.
FEField solve_qdot(const ReferenceMesh& m, const WeightedOperators& ops, const FEField& q,
                   const TimedepOptions& opts = {});

struct HarmonicRates {
    std::vector<FEField> grad_q_dot;  // Face, rates of the flux representers r_k
    Eigen::MatrixXd alpha_dot;
    std::vector<FEField> eta_dot;     // Face
};

/// Rates of the V_har basis; basis must be orthonormalized.
HarmonicRates harmonic_rates(const HarmonicBasis& basis, const WeightedOperators& ops,
                             const TimedepOptions& opts = {});

struct VharRate {
    FEField h_dot;      // Face
    VectorXd coeffs_dot;
};

/// Rate of h = sum <b, eta_k>_t eta_k given b and its rate.
VharRate vhar_projection_rate(const FEField& b, const FEField& b_dot, const HarmonicBasis& basis,
                              const HarmonicRates& rates, const WeightedOperators& ops);

/// t-derivative of the Schur complement potential: S pdot = -d2 fdot - Sdot p.
FEField solve_pdot(const FEField& p, const FEField& f_dot, const WeightedOperators& ops,
                   const TimedepOptions& opts = {});

/// Rate of the weak gradient -J M2^{-1} d2^T p.
VectorXd weak_gradient_rate(const WeightedOperators& ops, const VectorXd& p, const VectorXd& p_dot,
                            double tol = 1e-14);

/// Rates of the cut-potential 1-forms, -d0 phidot with K0 phidot = d0^T M1dot grad p.
std::vector<FEField> cut_potential_rates(const CutPotentialBasis& cuts, const WeightedOperators& ops,
                                         const TimedepOptions& opts = {});

struct WdotResult {
    FEField w_dot;        // Edge
    FEField curl_w_dot;   // Face, d/dt (J^{-1} d1 w)
    VectorXd flux_rates;  // d/dt <w, grad p_l>_t
    double gauge_rate = 0.0;  // |d/dt (d0^T M1 w)| / |M1 w|
};

/// Differentiates d1 w = J (b - h) together with the gauge d0^T M1 w = 0
/// and the cut constraints <w, grad p_l>_t = 0.
WdotResult solve_wdot(const FEField& w, const FEField& b, const FEField& h, const FEField& b_dot,
                      const FEField& h_dot, const CutPotentialBasis& cuts, const WeightedOperators& ops,
                      const TimedepOptions& opts = {});

/// Rot(t) w for a fixed nodal pushforward field w: J^{-1} d1 of the edge
/// circulations of g_lower(t) w.
FEField rot_apply(const ReferenceMesh& m, const DomainMotion& motion, double t, const FEField& w);

/// t-derivative of rot_apply at the time of ops.
FEField rotdot_apply(const ReferenceMesh& m, const WeightedOperators& ops, const FEField& w);

/// Fourth-order central difference of a time family of dof vectors.
VectorXd time_rate(const std::function<VectorXd(double)>& family, double t, double step);

/// Face dofs at time t of a general field; the data the derivatives are taken of.
using FaceFamily = std::function<VectorXd(const ReferenceMesh&, const DomainMotion&, double)>;

/// Face family of a fixed physical field.
FaceFamily physical_face_family(VectorFn f);

struct DecompositionState {
    double time = 0.0;
    WeightedOperators ops;
    HarmonicBasis basis;
    CutPotentialBasis cuts;
    HWTriple triple;
    FEField f;
    FEField b;  // f - grad p
};

DecompositionState decompose_at(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                const FaceFamily& family, bool rates, const TimedepOptions& opts = {});

struct DotFields {
    double t0 = 0.0;
    std::vector<FEField> q_dot;  // NodalScalar
    FEField p_dot;               // Cell
    FEField p_dot_nodal;         // NodalScalar, zero on the boundary
    FEField w_dot;               // Edge
    FEField h_dot, b_dot, f_dot; // Face
    FEField curl_w_dot;          // Face
    VectorXd flux_rates;
    double gauge_rate = 0.0;
    double residual_rate = 0.0;  // |bdot - hdot - d/dt curl w|_t / max(|bdot|_t, |b|_t)
    bool data_rate_by_difference = true;
};

DotFields differentiate(const DecompositionState& s, const FaceFamily& family, const TimedepOptions& opts = {});

struct ConsistencyRow {
    std::string quantity;
    double eps = 0.0;
    double err_eps = 0.0, err_eps10 = 0.0;
    double ratio = 0.0;  // err_eps / err_eps10
    double scale = 0.0;  // norm of the derivative the errors are relative to
};

/// Relative errors of one-sided differences (X(t0 + eps) - X(t0)) / eps against
/// the dotted fields, at eps and eps / 10, for q (H1), p (L2), h (L2) and w (L2).
std::vector<ConsistencyRow> consistency_table(const AnchorFrame& frame, const FaceFamily& family, double eps,
                                              const TimedepOptions& opts = {});

}  // namespace mdhw
