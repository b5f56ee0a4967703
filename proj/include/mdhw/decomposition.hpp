/// @file decomposition.hpp
/// @brief Helmholtz-Weyl decomposition f = h + curl w + grad p on Omega(t).
///
/// f, h, curl w and grad p are Face 2-forms, w is an Edge 1-form and p is
/// a Cell (P0) field. grad p is the weak gradient -J M2^{-1} d2^T p, whose
/// natural boundary condition is p = 0 on the boundary.
#pragma once

#include <cstdint>

#include "mdhw/harmonic.hpp"

namespace mdhw {

struct DecompositionOptions {
    double rel_tol = 1e-11;    // outer CG solves
    double inner_tol = 1e-13;  // M2 solves inside the Schur complement
    double div_tol = 1e-6;     // NonSolenoidalInput threshold (relative cell divergence)
};

struct ScalarPotential {
    FEField p;       // Cell
    FEField grad_p;  // Face
    CGResult solve;
};

/// Weak gradient -J M2^{-1} d2^T p of a cell field.
VectorXd weak_gradient(const WeightedOperators& ops, const VectorXd& p, double tol = 1e-14);

/// Solves J d2 M2^{-1} d2^T p = rhs by CG with nested mass solves.
VectorXd schur_solve(const WeightedOperators& ops, const VectorXd& rhs, const DecompositionOptions& opts = {},
                     CGResult* info = nullptr);

/// Solves J d2 M2^{-1} d2^T p = -d2 f, so that f - grad p is divergence free.
ScalarPotential scalar_potential(const FEField& f, const WeightedOperators& ops,
                                 const DecompositionOptions& opts = {});

/// Vertex values of a cell field from local linear fits, zero on boundary vertices.
VectorXd cell_to_nodal_dirichlet(const ReferenceMesh& m, const VectorXd& p);

struct SolenoidalParts {
    FEField h;       // Face, V_har part
    FEField w;       // Edge, potential in Z_sigma
    FEField curl_w;  // Face, J^{-1} d1 w
    VectorXd coeffs_h;
    VectorXd fluxes_w;  // <w, grad p_l>_t
    double div_defect = 0.0;  // |d0^T M1 w| / |M1 w|, weak divergence and normal trace of w
    CGResult solve;
};

/// Largest |d2 b| over cells, relative to the largest face value of b.
double relative_divergence(const FEField& b, const WeightedOperators& ops);

/// Requires eta in basis. Throws NonSolenoidalInput if the relative cell
/// divergence of b exceeds opts.div_tol.
SolenoidalParts decompose_solenoidal(const FEField& b, const HarmonicBasis& basis,
                                     const CutPotentialBasis& cuts, const WeightedOperators& ops,
                                     const DecompositionOptions& opts = {});

struct HWTriple {
    double time = 0.0;
    FEField h, w, p;        // Face, Edge, Cell
    FEField curl_w, grad_p; // Face
    VectorXd coeffs_h;
    VectorXd fluxes_w;
    double residual = 0.0;  // |f - h - curl w - grad p|_t / |f|_t
    // |<a, b>_t| / |f|_t^2 for the three pairs
    double orth_h_curl = 0.0, orth_h_grad = 0.0, orth_curl_grad = 0.0;
    double div_defect = 0.0;
};

HWTriple decompose_general(const FEField& f, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                           const WeightedOperators& ops, const DecompositionOptions& opts = {});

/// |w|_{H2 broken} / |b|_{H1} for one solenoidal probe.
double c_omega_ratio(const FEField& b, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                     const ReferenceMesh& m, const WeightedOperators& ops, const DecompositionOptions& opts = {});

/// Solenoidal probe k: curl of a random low-frequency trigonometric vector
/// potential (counter-based, so probe k does not depend on n_probes),
/// normalized to unit H1_t norm.
FEField random_solenoidal_probe(const ReferenceMesh& m, const WeightedOperators& ops, std::uint64_t seed, int k);

/// Maximum of c_omega_ratio over n_probes random probes (n_probes >= 8).
double estimate_C_omega(const ReferenceMesh& m, const DomainMotion& motion, double t, int n_probes,
                        std::uint64_t seed = 1, const DecompositionOptions& opts = {});

}  // namespace mdhw
