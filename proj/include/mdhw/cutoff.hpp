/// @file cutoff.hpp
/// @brief Boundary cut-off theta_rho(y) = Theta(d(y), rho) with a
/// logarithmic profile and the Leray pairing <N[u,u], Rot(t)[theta, w]>_t.
#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mdhw/fem.hpp"

namespace mdhw {

/// Exact distance to the boundary facets of a reference mesh, accelerated
/// by a uniform bucket grid.
class BoundaryDistance {
public:
    explicit BoundaryDistance(const ReferenceMesh& m);

    /// Distance from p to the boundary; grad (optional) receives the unit
    /// direction away from the closest boundary point.
    double operator()(const Vec3& p, Vec3* grad = nullptr) const;

private:
    std::vector<std::array<Vec3, 3>> tris_;
    Vec3 lo_;
    double cell_ = 1.0;
    std::array<int, 3> dims_{1, 1, 1};
    std::vector<std::vector<int>> buckets_;

    int bucket_index(int i, int j, int k) const { return (k * dims_[1] + j) * dims_[0] + i; }
};

/// Nodal distance to the boundary; zero exactly on boundary vertices.
FEField distance_to_boundary(const ReferenceMesh& m);

/// xi(z, rho): 1 below e^{-2/rho}, rho log(e^{-1/rho} / z) up to e^{-1/rho}, 0 above.
double xi_profile(double z, double rho);

/// Mollified profile Theta(z) = int chi_lambda(z') xi(z - z') dz', with the
/// bump chi(s) = exp(-1 / (1 - s^2)) normalized by the same 64-point Gauss
/// rule. Values between the plateaus come from a 1024-point cubic Hermite
/// table; outside [e^{-2/rho} - lambda, e^{-1/rho} + lambda] Theta is 1 or 0.
class CutoffFunction {
public:
    CutoffFunction(double rho, double lambda);

    double value(double z) const;
    double derivative(double z) const;
    /// Direct quadrature, used to build and validate the table.
    double value_direct(double z) const;
    double derivative_direct(double z) const;

    double rho() const { return rho_; }
    double lambda() const { return lambda_; }

private:
    double rho_, lambda_, k1_, k2_;
    struct Segment {
        double a, b;
        bool log_spaced;
        std::vector<double> z, v, dv;
    };
    std::vector<Segment> segs_;
    void direct(double z, double& v, double& dv) const;
};

struct CutoffOptions {
    double d_star = 0.45;  // collar width, rho must stay below min(1, -1/log d_star)
    double lambda = -1.0;  // mollifier width; <= 0 picks e^{-2/delta} / 8
};

struct CutoffProfile {
    double rho = 0.0, delta = 0.0, lambda = 0.0, d_star = 0.0;
    std::shared_ptr<const CutoffFunction> Theta;
    FEField distance;    // NodalScalar
    FEField theta;       // NodalScalar
    FEField grad_theta;  // NodalVector, reference gradient
    // per cell, per point of tet_quadrature(): distance, theta and reference gradient
    std::vector<double> qp_distance, qp_theta;
    std::vector<Vec3> qp_grad;
};

/// Throws BadParameters unless 0 < rho < rho_star, 2 delta < rho and lambda < e^{-2/delta} / 4.
CutoffProfile build_cutoff(const ReferenceMesh& m, double rho, double delta, const CutoffOptions& opts = {});

/// max over quadrature points with d > 0 of |grad theta| d / (2 sqrt(3) rho).
double gradient_bound_ratio(const CutoffProfile& c);

struct LerayPairing {
    double value = 0.0;
    double grad_u_sq = 0.0;  // |grad_y u|^2_{L2}
    double ratio = 0.0;      // value / grad_u_sq
};

/// Weighted triple pairing for nodal pushforward fields u (zero boundary
/// trace) and w at time t.
LerayPairing leray_pairing(const ReferenceMesh& m, const FEField& u, const CutoffProfile& c, const FEField& w,
                           const DomainMotion& motion, double t);

/// |u / d|_{L2} / |grad u|_{L2} for a nodal vector field with zero trace.
double hardy_ratio(const ReferenceMesh& m, const FEField& u, const CutoffProfile& c);

/// Largest rho in (rho_min, rho_max] with ratio(rho) <= eps, by halving and
/// bisection; ratio should be nondecreasing in rho. Returns 0 if none found.
double select_rho(const std::function<double(double)>& ratio, double eps, double rho_max, double rho_min = 1e-3,
                  int iterations = 30);

}  // namespace mdhw
