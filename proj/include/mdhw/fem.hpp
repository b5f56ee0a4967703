/// @file fem.hpp
/// @brief Weighted finite element operators on a reference mesh.
///
/// Scalars are P1 (vertex) or P0 (cell) fields. Vector fields live in the
/// lowest-order Whitney spaces: edge 1-forms carry physical circulations
/// (covector omega = A^T w) and face 2-forms carry reference fluxes of the
/// pushforward (physical flux = J * reference flux). Nodal vector fields are
/// kept for export, recovery and the nodal mass/stiffness operators.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <string>
#include <vector>

#include "mdhw/geometry.hpp"
#include "mdhw/mesh.hpp"

namespace mdhw {

using SpMat = Eigen::SparseMatrix<double>;
using Eigen::VectorXd;

enum class FieldKind { NodalScalar, NodalVector, Edge, Face, Cell };

std::string to_string(FieldKind k);

struct FEField {
    FieldKind kind = FieldKind::NodalScalar;
    VectorXd values;  // NodalVector: 3 entries per vertex, interleaved

    /// Expected coefficient count for kind on mesh m.
    static int size_for(FieldKind kind, const ReferenceMesh& m);
    bool matches(const ReferenceMesh& m) const { return values.size() == size_for(kind, m); }
};

/// 4-point degree-2 rule in barycentric coordinates (weights sum to 1).
struct TetQuadrature {
    std::array<Eigen::Vector4d, 4> bary;
    std::array<double, 4> weight;
};
const TetQuadrature& tet_quadrature();

struct GaussRule {
    std::vector<double> x, w;  // nodes and weights on [-1, 1]
};
GaussRule gauss_legendre(int n);

/// Local Whitney basis of one tet: barycentric gradients and the signs that
/// map local edges and faces to their global orientation.
struct TetBasis {
    Eigen::Matrix<double, 4, 3> grad;  // rows: grad lambda_i
    std::array<int, 6> edge_sign;      // +1 if local (i, j) agrees with global (a < b)
    std::array<std::array<int, 3>, 4> face_local;  // local vertex ids of face i in global order
    double volume = 0.0;

    TetBasis(const ReferenceMesh& m, int t);

    /// Edge basis functions at barycentric point l (rows are the 6 local edges).
    Eigen::Matrix<double, 6, 3> edge_values(const Eigen::Vector4d& l) const;
    /// Constant curls of the edge basis functions.
    Eigen::Matrix<double, 6, 3> edge_curls() const;
    /// Face basis functions at barycentric point l (rows are the 4 local faces).
    Eigen::Matrix<double, 4, 3> face_values(const Eigen::Vector4d& l) const;
    /// Constant divergences of the face basis functions.
    Eigen::Vector4d face_divs() const;
};

/// Local (01)(02)(03)(12)(13)(23) edge table.
extern const int kLocalEdges[6][2];

struct Incidence {
    SpMat d0;  // edges x vertices
    SpMat d1;  // faces x edges
    SpMat d2;  // cells x faces, outward signs
};
Incidence build_incidence(const ReferenceMesh& m);

struct AssemblyOptions {
    bool nodal = false;  // nodal vector mass_t / stiffness_t
    bool rates = false;  // t-derivatives of the weighted matrices
};

struct WeightedOperators {
    const ReferenceMesh* mesh = nullptr;
    const DomainMotion* motion = nullptr;  // must outlive the operators
    double time = 0.0;
    double J = 1.0, dJ_ds = 0.0;

    SpMat d0, d1, d2;  // grad, curl, div incidence

    SpMat M0;     // P1: int phi_a phi_b J
    SpMat M1;     // edges: int g^{ij} W_a W_b J
    SpMat M2;     // faces: int g_{ij} F_a F_b J
    VectorXd M3;  // cells: J vol
    SpMat K0;     // d0^T M1 d0, weak form of -J L(t)
    SpMat lap_Lt;  // K0 / J, weak form of -L(t)

    SpMat mass_t;       // nodal vector, int g_ij phi_a phi_b J
    SpMat stiffness_t;  // nodal vector, int g_ij g^{kl} (nabla_k u^i)(nabla_l v^j) J

    bool has_rates = false;
    SpMat dM0, dM1, dM2, dK0;
    VectorXd dM3;

    VectorXd vol;  // reference cell volumes

    int nv() const { return static_cast<int>(M0.rows()); }
    int ne() const { return static_cast<int>(M1.rows()); }
    int nf() const { return static_cast<int>(M2.rows()); }
    int nc() const { return static_cast<int>(M3.size()); }
};

WeightedOperators assemble_weighted(const ReferenceMesh& mesh, const DomainMotion& motion, double t,
                                    AssemblyOptions opts = {});

// ---- interpolation of analytic physical fields ----

using ScalarFn = std::function<double(const Vec3& x)>;
using VectorFn = std::function<Vec3(const Vec3& x)>;

/// Nodal values of f at x = phi_inv(y, t).
VectorXd interpolate_nodal_scalar(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                  const ScalarFn& f);
/// Nodal pushforward u tilde = A^{-1} u(x), interleaved.
VectorXd interpolate_nodal_vector(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                  const VectorFn& u);
/// Edge circulations of the physical field u (3-point Gauss per edge).
VectorXd interpolate_edge(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorFn& u);
/// Reference face fluxes of the pushforward of u (7-point rule per face).
VectorXd interpolate_face(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorFn& u);
/// Cell averages of f (4-point rule).
VectorXd interpolate_cell(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const ScalarFn& f);

// ---- evaluation and recovery ----

/// Pushforward proxy u tilde of a 2-form inside tet t at barycentric l.
Vec3 eval_face_field(const ReferenceMesh& m, const VectorXd& dofs, int t, const Eigen::Vector4d& l);
/// Covector omega of a 1-form inside tet t at barycentric l.
Vec3 eval_edge_field(const ReferenceMesh& m, const VectorXd& dofs, int t, const Eigen::Vector4d& l);

/// Physical vector of a 2-form at each cell centroid.
std::vector<Vec3> face_field_cells(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                   const VectorXd& dofs);
/// Physical vector of a 1-form at each cell centroid.
std::vector<Vec3> edge_field_cells(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                   const VectorXd& dofs);
/// Volume-weighted averaging of cell vectors to vertices (interleaved).
VectorXd cells_to_nodes(const ReferenceMesh& m, const std::vector<Vec3>& cell_values);
/// Volume-weighted averaging of cell scalars to vertices.
VectorXd cells_to_nodes(const ReferenceMesh& m, const VectorXd& cell_values);

/// Reference gradient of a P1 field on each cell.
std::vector<Vec3> p1_gradients(const ReferenceMesh& m, const VectorXd& u);
/// Max over cells of |div_x u - div_y u tilde| for a P1 field u given at the
/// physical vertices phi_inv(y_a, t) (interleaved), with u tilde the nodal
/// pushforward on the reference mesh. Exact for motions affine in x.
double divergence_preservation_defect(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                      const VectorXd& u_physical);
/// Nodal gradient recovery by volume-weighted least-squares fits of the
/// neighboring cell gradients (linear inside, quadratic at the boundary);
/// output is the physical gradient at each vertex, interleaved.
VectorXd recover_gradient(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorXd& u);

// ---- fluxes and norms ----

/// Physical flux of a face or nodal-vector field through boundary label k
/// (surface_is_cut = false, outward) or cut label l (along nu_l).
double surface_flux(const FEField& field, int label, bool surface_is_cut, const ReferenceMesh& m,
                    const WeightedOperators& ops);

struct Norms {
    double L2_t = 0.0;
    double H1_t = 0.0;
    double H2_broken = 0.0;
};

/// Norms of NodalScalar (M0 / K0), NodalVector (mass_t / stiffness_t),
/// Edge (M1) or Face (M2) fields. H2_broken is a second-difference recovery.
Norms norms(const FEField& field, const ReferenceMesh& m, const WeightedOperators& ops);

/// Smallest eigenvalue of an SPD matrix by inverse power iteration.
double min_eigenvalue(const SpMat& A, int iterations = 20);

/// Ratio bounds of the weight J * eig(g_lower) over all quadrature points.
std::pair<double, double> metric_weight_bounds(const ReferenceMesh& m, const DomainMotion& motion,
                                               double t);

}  // namespace mdhw
