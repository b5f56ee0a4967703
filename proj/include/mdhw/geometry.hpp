/// @file geometry.hpp
/// @brief Moving-domain diffeomorphisms and the pulled-back geometry.
///
/// Conventions: y = phi(x, t) maps the physical domain Omega(t) onto the
/// reference domain; x = phi_inv(y, s) is its inverse. A = dx/dy, so
/// g_lower = A^T A, g_upper = A^{-1} A^{-T} and J = det A.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mdhw/jet.hpp"

namespace mdhw {

template <class S>
using V3 = std::array<S, 3>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline V3<double> to_v3(const Vec3& v) { return {v[0], v[1], v[2]}; }
inline Vec3 to_vec(const V3<double>& v) { return {v[0], v[1], v[2]}; }

// ============================================================================
// Motions
// ============================================================================

class DomainMotion {
public:
    virtual ~DomainMotion() = default;

    virtual std::string name() const = 0;
    virtual double period() const = 0;
    /// True when derivatives are exact (not finite differences).
    virtual bool analytic() const { return true; }

    virtual V3<double> phi(const V3<double>& x, double t) const = 0;
    virtual V3<Jet1> phi(const V3<Jet1>& x, const Jet1& t) const = 0;
    virtual V3<Jet2> phi(const V3<Jet2>& x, const Jet2& t) const = 0;
    virtual V3<Jet3> phi(const V3<Jet3>& x, const Jet3& t) const = 0;

    virtual V3<double> phi_inv(const V3<double>& y, double s) const = 0;
    virtual V3<Jet1> phi_inv(const V3<Jet1>& y, const Jet1& s) const = 0;
    virtual V3<Jet2> phi_inv(const V3<Jet2>& y, const Jet2& s) const = 0;
    virtual V3<Jet3> phi_inv(const V3<Jet3>& y, const Jet3& s) const = 0;

    /// J(t) = det(dx/dy); spatially constant for admissible motions.
    virtual double jacobian(double t) const;
    /// Reference point used to evaluate spatially constant quantities.
    virtual V3<double> sample_point() const { return {1.5, 0.1, 0.2}; }
};

using MotionPtr = std::shared_ptr<const DomainMotion>;

/// Adapter: Impl supplies template map(x, t) and inv(y, s).
template <class Impl>
class MotionT : public DomainMotion {
public:
    V3<double> phi(const V3<double>& x, double t) const override { return self().map(x, t); }
    V3<Jet1> phi(const V3<Jet1>& x, const Jet1& t) const override { return self().map(x, t); }
    V3<Jet2> phi(const V3<Jet2>& x, const Jet2& t) const override { return self().map(x, t); }
    V3<Jet3> phi(const V3<Jet3>& x, const Jet3& t) const override { return self().map(x, t); }
    V3<double> phi_inv(const V3<double>& y, double s) const override { return self().inv(y, s); }
    V3<Jet1> phi_inv(const V3<Jet1>& y, const Jet1& s) const override { return self().inv(y, s); }
    V3<Jet2> phi_inv(const V3<Jet2>& y, const Jet2& s) const override { return self().inv(y, s); }
    V3<Jet3> phi_inv(const V3<Jet3>& y, const Jet3& s) const override { return self().inv(y, s); }

private:
    const Impl& self() const { return static_cast<const Impl&>(*this); }
};

class IdentityMotion : public MotionT<IdentityMotion> {
public:
    explicit IdentityMotion(double period = 1.0) : period_(period) {}
    std::string name() const override { return "identity"; }
    double period() const override { return period_; }
    double jacobian(double) const override { return 1.0; }
    template <class S>
    V3<S> map(const V3<S>& x, const S&) const { return x; }
    template <class S>
    V3<S> inv(const V3<S>& y, const S&) const { return y; }

private:
    double period_;
};

/// y = x / lambda(t), lambda(t) = lambda0 + amplitude * sin(2 pi t / period).
class DilationMotion : public MotionT<DilationMotion> {
public:
    DilationMotion(double lambda0, double amplitude, double period);
    std::string name() const override { return "dilation"; }
    double period() const override { return period_; }
    double jacobian(double t) const override;

    double lambda(double t) const;
    double lambda_dot(double t) const;

    template <class S>
    S lam(const S& t) const {
        using std::sin;
        return lambda0_ + amp_ * sin(t * omega_);
    }
    template <class S>
    V3<S> map(const V3<S>& x, const S& t) const {
        S il = 1.0 / lam(t);
        return {x[0] * il, x[1] * il, x[2] * il};
    }
    template <class S>
    V3<S> inv(const V3<S>& y, const S& s) const {
        S l = lam(s);
        return {y[0] * l, y[1] * l, y[2] * l};
    }

private:
    double lambda0_, amp_, period_, omega_;
};

/// y1 = x1 + a sin(omega t) x2.
class ShearMotion : public MotionT<ShearMotion> {
public:
    ShearMotion(double a, double omega) : a_(a), omega_(omega) {}
    std::string name() const override { return "shear"; }
    double period() const override;
    double jacobian(double) const override { return 1.0; }
    template <class S>
    V3<S> map(const V3<S>& x, const S& t) const {
        using std::sin;
        return {x[0] + a_ * sin(t * omega_) * x[1], x[1], x[2]};
    }
    template <class S>
    V3<S> inv(const V3<S>& y, const S& s) const {
        using std::sin;
        return {y[0] - a_ * sin(s * omega_) * y[1], y[1], y[2]};
    }

private:
    double a_, omega_;
};

/// Radial map of the shell R1(t) < |x| < R0 onto rho1 < |y| < rho0 with
/// |y|^3 = c(t)|x|^3 + d(t), so det(dy/dx) = c(t) is spatially constant.
/// R1(t) = R1_mean + amplitude * sin(2 pi t / period).
class PulsatingAnnulusMotion : public MotionT<PulsatingAnnulusMotion> {
public:
    PulsatingAnnulusMotion(double R0, double R1_mean, double amplitude, double period,
                           double rho0, double rho1);
    std::string name() const override { return "pulsating_annulus"; }
    double period() const override { return period_; }
    double jacobian(double t) const override;
    V3<double> sample_point() const override { return {0.5 * (rho0_ + rho1_), 0.0, 0.0}; }

    double R0() const { return R0_; }
    double R1(double t) const;
    double rho0() const { return rho0_; }
    double rho1() const { return rho1_; }

    template <class S>
    S inner(const S& t) const {
        using std::sin;
        return R1m_ + amp_ * sin(t * omega_);
    }
    template <class S>
    void coeffs(const S& t, S& c, S& d) const {
        S r1 = inner(t);
        S r13 = r1 * r1 * r1;
        c = (rho0_ * rho0_ * rho0_ - rho1_ * rho1_ * rho1_) / (R0_ * R0_ * R0_ - r13);
        d = rho1_ * rho1_ * rho1_ - c * r13;
    }
    template <class S>
    V3<S> map(const V3<S>& x, const S& t) const {
        using std::cbrt;
        using std::sqrt;
        S c, d;
        coeffs(t, c, d);
        S r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        S r3 = r2 * sqrt(r2);
        S f = cbrt(c + d / r3);
        return {x[0] * f, x[1] * f, x[2] * f};
    }
    template <class S>
    V3<S> inv(const V3<S>& y, const S& s) const {
        using std::cbrt;
        using std::sqrt;
        S c, d;
        coeffs(s, c, d);
        S r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
        S r3 = r2 * sqrt(r2);
        S f = cbrt((1.0 - d / r3) / c);
        return {y[0] * f, y[1] * f, y[2] * f};
    }

private:
    double R0_, R1m_, amp_, period_, omega_, rho0_, rho1_;
};

/// User-supplied maps; derivatives by 4th-order central differences with
/// step h = 1e-4 (1 + |x|) in every variable.
class CallableMotion : public DomainMotion {
public:
    using Map = std::function<V3<double>(const V3<double>&, double)>;
    CallableMotion(std::string name, Map phi, Map phi_inv, double period,
                   V3<double> sample = {1.5, 0.1, 0.2});

    std::string name() const override { return name_; }
    double period() const override { return period_; }
    bool analytic() const override { return false; }
    V3<double> sample_point() const override { return sample_; }

    V3<double> phi(const V3<double>& x, double t) const override { return phi_(x, t); }
    V3<Jet1> phi(const V3<Jet1>& x, const Jet1& t) const override;
    V3<Jet2> phi(const V3<Jet2>& x, const Jet2& t) const override;
    V3<Jet3> phi(const V3<Jet3>& x, const Jet3& t) const override;
    V3<double> phi_inv(const V3<double>& y, double s) const override { return inv_(y, s); }
    V3<Jet1> phi_inv(const V3<Jet1>& y, const Jet1& s) const override;
    V3<Jet2> phi_inv(const V3<Jet2>& y, const Jet2& s) const override;
    V3<Jet3> phi_inv(const V3<Jet3>& y, const Jet3& s) const override;

private:
    std::string name_;
    Map phi_, inv_;
    double period_;
    V3<double> sample_;
};

/// Composite chart anchored at t0: phi_a(x, t) = phi_inv(phi(x, t), t0) maps
/// Omega(t) onto Omega(t0); it is the identity at t = t0.
class AnchoredMotion : public DomainMotion {
public:
    AnchoredMotion(MotionPtr base, double t0) : base_(std::move(base)), t0_(t0) {}
    std::string name() const override { return base_->name() + "@anchor"; }
    double period() const override { return base_->period(); }
    bool analytic() const override { return base_->analytic(); }
    double jacobian(double t) const override { return base_->jacobian(t) / base_->jacobian(t0_); }
    V3<double> sample_point() const override { return base_->phi_inv(base_->sample_point(), t0_); }
    double anchor() const { return t0_; }
    const DomainMotion& base() const { return *base_; }

    V3<double> phi(const V3<double>& x, double t) const override { return fwd(x, t); }
    V3<Jet1> phi(const V3<Jet1>& x, const Jet1& t) const override { return fwd(x, t); }
    V3<Jet2> phi(const V3<Jet2>& x, const Jet2& t) const override { return fwd(x, t); }
    V3<Jet3> phi(const V3<Jet3>& x, const Jet3& t) const override { return fwd(x, t); }
    V3<double> phi_inv(const V3<double>& y, double s) const override { return bwd(y, s); }
    V3<Jet1> phi_inv(const V3<Jet1>& y, const Jet1& s) const override { return bwd(y, s); }
    V3<Jet2> phi_inv(const V3<Jet2>& y, const Jet2& s) const override { return bwd(y, s); }
    V3<Jet3> phi_inv(const V3<Jet3>& y, const Jet3& s) const override { return bwd(y, s); }

private:
    template <class S>
    V3<S> fwd(const V3<S>& x, const S& t) const {
        return base_->phi_inv(base_->phi(x, t), S(t0_));
    }
    template <class S>
    V3<S> bwd(const V3<S>& y, const S& s) const {
        return base_->phi_inv(base_->phi(y, S(t0_)), s);
    }
    MotionPtr base_;
    double t0_;
};

MotionPtr make_identity(double period = 1.0);
MotionPtr make_dilation(double lambda0, double amplitude, double period);
MotionPtr make_shear(double a, double omega);
MotionPtr make_pulsating_annulus(double R0, double R1_mean, double amplitude, double period);

// ============================================================================
// Pointwise geometry
// ============================================================================

/// Everything derivable from a second-order jet of phi_inv at (y, s).
struct PointGeometry {
    Vec3 y, x, dx_ds;
    Mat3 A, Ainv, dA_ds;         // A(m, k) = dx^m / dy^k
    std::array<Mat3, 3> H;       // H[m](k, l) = d^2 x^m / dy^k dy^l
    double J = 1.0, dJ_ds = 0.0;
    double s = 0.0;
};

/// First-order quantities only (cheap path for assembly).
struct PointFrame {
    Vec3 x;
    Mat3 A, Ainv;
    double J = 1.0;
};

struct MetricSample {
    Mat3 g_upper, g_lower;
    std::array<Mat3, 3> christoffel;  // christoffel[k](i, j) = Gamma^k_ij
    double J = 1.0, dJ_ds = 0.0;
    Mat3 dg_lower_ds;
    Vec3 point;
    double time = 0.0;
};

using Tensor4 = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;
using Tensor3 = std::array<std::array<std::array<double, 3>, 3>, 3>;

struct KernelTensors {
    Tensor4 R1{}, R2{}, S{};  // [i][j][k][l]
    Mat3 Gdot = Mat3::Zero();  // dg^{ij}/dt at the anchor
    Mat3 Rdot1 = Mat3::Zero();  // [i][l]
    Tensor3 Rdot2{};            // [i][k][l]
    Vec3 point;
    double time = 0.0;
};

PointFrame frame_at_ref(const DomainMotion& m, const Vec3& y, double s);
PointGeometry geometry_at_ref(const DomainMotion& m, const Vec3& y, double s);

/// Metric at the reference point y.
MetricSample metric_at_ref(const DomainMotion& m, const Vec3& y, double s);
/// Metric at the physical point x (evaluated at y = phi(x, t)).
MetricSample metric_at(const DomainMotion& m, const Vec3& x, double t);

/// u tilde = (dy/dx) u at y = phi(x, t).
Vec3 pushforward(const DomainMotion& m, const Vec3& u, const Vec3& x, double t);
/// u = (dx/dy) u tilde at the reference point y.
Vec3 pullback(const DomainMotion& m, const Vec3& ut, const Vec3& y, double t);

/// Rot kernels of the chart y <-> x at the reference point y and time t.
KernelTensors rot_kernels_ref(const DomainMotion& m, const Vec3& y, double t);
/// Kernels of the composite chart anchored at t0, at x tilde in Omega(t0).
/// Gdot, Rdot1, Rdot2 are the t-derivatives at t = t0.
KernelTensors rot_kernels_at(const MotionPtr& m, double t0, const Vec3& xt, double t);

/// Rot(t) w: sum R1 w^l + R2 dw^l/dy^k; dw(l, k) = dw^l/dy^k.
Vec3 apply_rot(const KernelTensors& k, const Vec3& w, const Mat3& dw);
/// t-derivative of Rot at the anchor applied to w.
Vec3 apply_rotdot(const KernelTensors& k, const Vec3& w, const Mat3& dw);
/// B1[u, v]^i = sum S^i_{jkl} (u^k v^l - u^l v^k).
Vec3 apply_B1(const KernelTensors& k, const Vec3& u, const Vec3& v);
/// B2[u, v] = g_kl u^k v^l.
double apply_B2(const MetricSample& g, const Vec3& u, const Vec3& v);

// ============================================================================
// Boundary charts and normals
// ============================================================================

/// Level set G tilde on the reference domain, positive outside the fluid.
class BoundaryChart {
public:
    virtual ~BoundaryChart() = default;
    virtual Jet2 G(const V3<Jet2>& xt) const = 0;
    virtual std::string name() const = 0;
};

class SphereChart : public BoundaryChart {
public:
    /// inner = true for a cavity boundary (fluid outside the sphere).
    SphereChart(double R, bool inner) : R_(R), inner_(inner) {}
    Jet2 G(const V3<Jet2>& xt) const override;
    std::string name() const override { return inner_ ? "sphere_inner" : "sphere_outer"; }

private:
    double R_;
    bool inner_;
};

class TorusChart : public BoundaryChart {
public:
    TorusChart(double R, double r) : R_(R), r_(r) {}
    Jet2 G(const V3<Jet2>& xt) const override;
    std::string name() const override { return "torus"; }

private:
    double R_, r_;
};

struct NormalSample {
    Vec3 nu;         // Euclidean-unit direction of g^{ik} dG/dx^k
    Vec3 nu_metric;  // g^{ik} dG/dx^k / sqrt(D): pushforward of the physical unit normal
    double D = 0.0;  // |grad_x G|^2
    double E = 0.0;  // |grad G tilde|^2
};

NormalSample normal_sample(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt,
                           double t);
Vec3 normal_at(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt, double t);
Vec3 normal_metric_at(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt, double t);

// ============================================================================
// Identity verification
// ============================================================================

struct GeometryReport {
    std::string motion;
    bool analytic = true;
    double tolerance = 1e-7;
    std::map<std::string, double> residuals;
    bool pass = false;
};

GeometryReport verify_geometry_identities(const DomainMotion& m, const std::vector<Vec3>& ref_points,
                                          const std::vector<double>& times);

/// Reference sample points used by verify-geometry runs.
std::vector<Vec3> default_sample_points(int n, unsigned long long seed);

}  // namespace mdhw
