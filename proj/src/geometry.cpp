/// @file geometry.cpp
/// @brief Built-in motions, jet-based pointwise geometry, kernels, normals.
#include "mdhw/geometry.hpp"

#include <cmath>

#include "mdhw/errors.hpp"
#include "mdhw/rng.hpp"

namespace mdhw {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// 3x3 determinant and inverse for generic scalars.
template <class S>
S det3(const std::array<std::array<S, 3>, 3>& a) {
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
           a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

template <class S>
std::array<std::array<S, 3>, 3> inv3(const std::array<std::array<S, 3>, 3>& a) {
    std::array<std::array<S, 3>, 3> r;
    r[0][0] = a[1][1] * a[2][2] - a[1][2] * a[2][1];
    r[0][1] = a[0][2] * a[2][1] - a[0][1] * a[2][2];
    r[0][2] = a[0][1] * a[1][2] - a[0][2] * a[1][1];
    r[1][0] = a[1][2] * a[2][0] - a[1][0] * a[2][2];
    r[1][1] = a[0][0] * a[2][2] - a[0][2] * a[2][0];
    r[1][2] = a[0][2] * a[1][0] - a[0][0] * a[1][2];
    r[2][0] = a[1][0] * a[2][1] - a[1][1] * a[2][0];
    r[2][1] = a[0][1] * a[2][0] - a[0][0] * a[2][1];
    r[2][2] = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    S id = 1.0 / det3(a);
    for (auto& row : r)
        for (auto& v : row) v = v * id;
    return r;
}

template <int P>
V3<Jet<P>> seed_point(const Vec3& y, double s, Jet<P>& sj) {
    sj = Jet<P>::variable(kTimeVar, s);
    return {Jet<P>::variable(0, y[0]), Jet<P>::variable(1, y[1]), Jet<P>::variable(2, y[2])};
}

void check_jacobian(double J) {
    // det(dphi/dx) = 1/J must stay above 1e-12
    if (!(J > 1e-12) || !(1.0 / J > 1e-12) || !std::isfinite(J))
        throw SingularJacobian("det(dphi/dx) = " + std::to_string(1.0 / J));
}

inline int sig(int j) { return j % 3; }

// ----------------------------------------------------------------------------
// Finite-difference Taylor expansion of a user map.
// ----------------------------------------------------------------------------

// 4th-order central stencils for derivatives of order 0..3.
struct Stencil {
    std::vector<int> off;
    std::vector<double> w;
};

const Stencil& stencil(int n) {
    static const Stencil s0{{0}, {1.0}};
    static const Stencil s1{{-2, -1, 1, 2}, {1.0 / 12, -8.0 / 12, 8.0 / 12, -1.0 / 12}};
    static const Stencil s2{{-2, -1, 0, 1, 2}, {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12}};
    static const Stencil s3{{-3, -2, -1, 1, 2, 3},
                            {1.0 / 8, -8.0 / 8, 13.0 / 8, -13.0 / 8, 8.0 / 8, -1.0 / 8}};
    switch (n) {
        case 0: return s0;
        case 1: return s1;
        case 2: return s2;
        default: return s3;
    }
}

template <int P>
std::array<std::array<double, Jet<P>::N>, 3> fd_taylor(const CallableMotion::Map& f,
                                                       const V3<double>& x0, double t0) {
    using L = JetLayout<P>;
    std::array<std::array<double, Jet<P>::N>, 3> T{};
    const double h = 1e-4 * (1.0 + std::sqrt(x0[0] * x0[0] + x0[1] * x0[1] + x0[2] * x0[2]));
    for (int a = 0; a < L::N; ++a) {
        const auto& e = L::table.exps[a];
        const Stencil* st[4];
        double scale = 1.0, fact = 1.0;
        for (int v = 0; v < 4; ++v) {
            st[v] = &stencil(e[v]);
            for (int k = 0; k < e[v]; ++k) scale /= h;
            for (int k = 2; k <= e[v]; ++k) fact *= k;
        }
        V3<double> acc{0, 0, 0};
        for (size_t i0 = 0; i0 < st[0]->off.size(); ++i0)
            for (size_t i1 = 0; i1 < st[1]->off.size(); ++i1)
                for (size_t i2 = 0; i2 < st[2]->off.size(); ++i2)
                    for (size_t i3 = 0; i3 < st[3]->off.size(); ++i3) {
                        const double w = st[0]->w[i0] * st[1]->w[i1] * st[2]->w[i2] * st[3]->w[i3];
                        V3<double> xp{x0[0] + h * st[0]->off[i0], x0[1] + h * st[1]->off[i1],
                                      x0[2] + h * st[2]->off[i2]};
                        auto val = f(xp, t0 + h * st[3]->off[i3]);
                        for (int c = 0; c < 3; ++c) acc[c] += w * val[c];
                    }
        for (int c = 0; c < 3; ++c) T[c][a] = acc[c] * scale / fact;
    }
    return T;
}

template <int P>
V3<Jet<P>> fd_eval(const CallableMotion::Map& f, const V3<Jet<P>>& x, const Jet<P>& t) {
    using L = JetLayout<P>;
    V3<double> x0{x[0].value(), x[1].value(), x[2].value()};
    const double t0 = t.value();
    auto T = fd_taylor<P>(f, x0, t0);
    // powers of the increments
    std::array<std::array<Jet<P>, P + 1>, 4> pw;
    for (int v = 0; v < 4; ++v) {
        Jet<P> d = (v < 3) ? x[v] : t;
        d.c[0] = 0.0;
        pw[v][0] = Jet<P>(1.0);
        for (int n = 1; n <= P; ++n) pw[v][n] = pw[v][n - 1] * d;
    }
    V3<Jet<P>> r;
    for (int a = 0; a < L::N; ++a) {
        const auto& e = L::table.exps[a];
        Jet<P> m = pw[0][e[0]] * pw[1][e[1]];
        m = m * pw[2][e[2]];
        m = m * pw[3][e[3]];
        for (int c = 0; c < 3; ++c) r[c] += T[c][a] * m;
    }
    return r;
}

}  // namespace

// ============================================================================
// Motions
// ============================================================================

double DomainMotion::jacobian(double t) const {
    return frame_at_ref(*this, to_vec(sample_point()), t).J;
}

DilationMotion::DilationMotion(double lambda0, double amplitude, double period)
    : lambda0_(lambda0), amp_(amplitude), period_(period), omega_(kTwoPi / period) {
    if (!(lambda0 - std::abs(amplitude) > 0.0) || !(period > 0.0))
        throw BadParameters("dilation requires lambda0 > |amplitude| and period > 0");
}

double DilationMotion::lambda(double t) const { return lam(t); }
double DilationMotion::lambda_dot(double t) const { return amp_ * omega_ * std::cos(omega_ * t); }
double DilationMotion::jacobian(double t) const {
    const double l = lambda(t);
    return l * l * l;
}

double ShearMotion::period() const { return omega_ != 0.0 ? kTwoPi / std::abs(omega_) : 1.0; }

PulsatingAnnulusMotion::PulsatingAnnulusMotion(double R0, double R1_mean, double amplitude,
                                               double period, double rho0, double rho1)
    : R0_(R0), R1m_(R1_mean), amp_(amplitude), period_(period), omega_(kTwoPi / period),
      rho0_(rho0), rho1_(rho1) {
    if (!(R1_mean - std::abs(amplitude) > 0.0) || !(R1_mean + std::abs(amplitude) < R0) ||
        !(rho1 > 0.0) || !(rho1 < rho0))
        throw InvalidRadii("pulsating annulus needs 0 < R1(t) < R0 and 0 < rho1 < rho0");
    if (!(period > 0.0)) throw BadParameters("period must be positive");
}

double PulsatingAnnulusMotion::R1(double t) const { return inner(t); }
double PulsatingAnnulusMotion::jacobian(double t) const {
    double c, d;
    coeffs(t, c, d);
    return 1.0 / c;
}

CallableMotion::CallableMotion(std::string name, Map phi, Map phi_inv, double period,
                               V3<double> sample)
    : name_(std::move(name)), phi_(std::move(phi)), inv_(std::move(phi_inv)), period_(period),
      sample_(sample) {}

V3<Jet1> CallableMotion::phi(const V3<Jet1>& x, const Jet1& t) const { return fd_eval<1>(phi_, x, t); }
V3<Jet2> CallableMotion::phi(const V3<Jet2>& x, const Jet2& t) const { return fd_eval<2>(phi_, x, t); }
V3<Jet3> CallableMotion::phi(const V3<Jet3>& x, const Jet3& t) const { return fd_eval<3>(phi_, x, t); }
V3<Jet1> CallableMotion::phi_inv(const V3<Jet1>& y, const Jet1& s) const { return fd_eval<1>(inv_, y, s); }
V3<Jet2> CallableMotion::phi_inv(const V3<Jet2>& y, const Jet2& s) const { return fd_eval<2>(inv_, y, s); }
V3<Jet3> CallableMotion::phi_inv(const V3<Jet3>& y, const Jet3& s) const { return fd_eval<3>(inv_, y, s); }

MotionPtr make_identity(double period) { return std::make_shared<IdentityMotion>(period); }
MotionPtr make_dilation(double lambda0, double amplitude, double period) {
    return std::make_shared<DilationMotion>(lambda0, amplitude, period);
}
MotionPtr make_shear(double a, double omega) { return std::make_shared<ShearMotion>(a, omega); }
MotionPtr make_pulsating_annulus(double R0, double R1_mean, double amplitude, double period) {
    return std::make_shared<PulsatingAnnulusMotion>(R0, R1_mean, amplitude, period, R0, R1_mean);
}

// ============================================================================
// Pointwise geometry
// ============================================================================

PointFrame frame_at_ref(const DomainMotion& m, const Vec3& y, double s) {
    Jet1 sj;
    auto Y = seed_point<1>(y, s, sj);
    auto X = m.phi_inv(Y, sj);
    PointFrame f;
    for (int a = 0; a < 3; ++a) {
        f.x[a] = X[a].value();
        for (int k = 0; k < 3; ++k) f.A(a, k) = X[a].d(k);
    }
    f.J = f.A.determinant();
    check_jacobian(f.J);
    f.Ainv = f.A.inverse();
    return f;
}

PointGeometry geometry_at_ref(const DomainMotion& m, const Vec3& y, double s) {
    Jet2 sj;
    auto Y = seed_point<2>(y, s, sj);
    auto X = m.phi_inv(Y, sj);
    PointGeometry g;
    g.y = y;
    g.s = s;
    for (int a = 0; a < 3; ++a) {
        g.x[a] = X[a].value();
        g.dx_ds[a] = X[a].d(kTimeVar);
        for (int k = 0; k < 3; ++k) {
            g.A(a, k) = X[a].d(k);
            g.dA_ds(a, k) = X[a].d2(k, kTimeVar);
            for (int l = 0; l < 3; ++l) g.H[a](k, l) = X[a].d2(k, l);
        }
    }
    g.J = g.A.determinant();
    check_jacobian(g.J);
    g.Ainv = g.A.inverse();
    g.dJ_ds = g.J * (g.Ainv * g.dA_ds).trace();
    return g;
}

MetricSample metric_at_ref(const DomainMotion& m, const Vec3& y, double s) {
    PointGeometry pg = geometry_at_ref(m, y, s);
    MetricSample ms;
    ms.g_lower = pg.A.transpose() * pg.A;
    ms.g_upper = pg.Ainv * pg.Ainv.transpose();
    for (int k = 0; k < 3; ++k) {
        ms.christoffel[k].setZero();
        for (int l = 0; l < 3; ++l) ms.christoffel[k] += pg.Ainv(k, l) * pg.H[l];
    }
    ms.J = pg.J;
    ms.dJ_ds = pg.dJ_ds;
    ms.dg_lower_ds = pg.dA_ds.transpose() * pg.A + pg.A.transpose() * pg.dA_ds;
    ms.point = y;
    ms.time = s;
    return ms;
}

MetricSample metric_at(const DomainMotion& m, const Vec3& x, double t) {
    return metric_at_ref(m, to_vec(m.phi(to_v3(x), t)), t);
}

Vec3 pushforward(const DomainMotion& m, const Vec3& u, const Vec3& x, double t) {
    Jet1 tj;
    auto Xj = seed_point<1>(x, t, tj);
    auto Y = m.phi(Xj, tj);
    Mat3 B;
    for (int i = 0; i < 3; ++i)
        for (int l = 0; l < 3; ++l) B(i, l) = Y[i].d(l);
    const double det = B.determinant();
    if (!(det > 1e-12)) throw SingularJacobian("det(dphi/dx) = " + std::to_string(det));
    return B * u;
}

Vec3 pullback(const DomainMotion& m, const Vec3& ut, const Vec3& y, double t) {
    return frame_at_ref(m, y, t).A * ut;
}

namespace {

template <int P>
using JM = std::array<std::array<Jet<P>, 3>, 3>;

// Kernels from jets of A (dx/dy) and H (d2x/dydy) carried as Jet<1> in t.
// Fills values; when with_rate, fills t-derivatives too.
void kernels_from(const JM<1>& A, const std::array<JM<1>, 3>& H, KernelTensors& K, bool with_rate,
                  Mat3* gdot) {
    JM<1> Ai = inv3(A);
    for (auto& v : K.Rdot2)
        for (auto& w : v) w.fill(0.0);
    K.Rdot1.setZero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const int j1 = sig(j + 1), j2 = sig(j + 2);
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    Jet1 r1 = Ai[i][j] * (Ai[k][j1] * H[j2][k][l] - Ai[k][j2] * H[j1][k][l]);
                    Jet1 r2 = Ai[i][j] * (Ai[k][j1] * A[j2][l] - Ai[k][j2] * A[j1][l]);
                    Jet1 s = Ai[i][j] * A[j1][k] * A[j2][l];
                    K.R1[i][j][k][l] = r1.value();
                    K.R2[i][j][k][l] = r2.value();
                    K.S[i][j][k][l] = s.value();
                    if (with_rate) {
                        K.Rdot1(i, l) += r1.d(kTimeVar);
                        K.Rdot2[i][k][l] += r2.d(kTimeVar);
                    }
                }
        }
    if (with_rate && gdot) {
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                Jet1 gij(0.0);
                for (int k = 0; k < 3; ++k) gij += Ai[i][k] * Ai[j][k];
                (*gdot)(i, j) = gij.d(kTimeVar);
            }
    }
}

template <int P>
void jet_frames(const DomainMotion& m, const Vec3& y, double s, JM<1>& A, std::array<JM<1>, 3>& H) {
    Jet<P> sj;
    auto Y = seed_point<P>(y, s, sj);
    auto X = m.phi_inv(Y, sj);
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < 3; ++k) {
            Jet<P - 1> dk = derivative(X[a], k);
            A[a][k] = truncate<1>(dk);
            for (int l = 0; l < 3; ++l) {
                if constexpr (P >= 3) {
                    H[a][k][l] = truncate<1>(derivative(dk, l));
                } else {
                    H[a][k][l] = Jet1(derivative(dk, l).value());
                }
            }
        }
}

}  // namespace

KernelTensors rot_kernels_ref(const DomainMotion& m, const Vec3& y, double t) {
    JM<1> A;
    std::array<JM<1>, 3> H;
    jet_frames<2>(m, y, t, A, H);
    KernelTensors K;
    kernels_from(A, H, K, false, nullptr);
    K.point = y;
    K.time = t;
    return K;
}

KernelTensors rot_kernels_at(const MotionPtr& m, double t0, const Vec3& xt, double t) {
    AnchoredMotion am(m, t0);
    JM<1> A;
    std::array<JM<1>, 3> H;
    jet_frames<3>(am, xt, t, A, H);
    // the determinant check uses the value part
    Mat3 Av;
    for (int a = 0; a < 3; ++a)
        for (int k = 0; k < 3; ++k) Av(a, k) = A[a][k].value();
    check_jacobian(Av.determinant());
    KernelTensors K;
    kernels_from(A, H, K, true, &K.Gdot);
    K.point = xt;
    K.time = t;
    return K;
}

Vec3 apply_rot(const KernelTensors& K, const Vec3& w, const Mat3& dw) {
    Vec3 r = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    r[i] += K.R1[i][j][k][l] * w[l] + K.R2[i][j][k][l] * dw(l, k);
    return r;
}

Vec3 apply_rotdot(const KernelTensors& K, const Vec3& w, const Mat3& dw) {
    Vec3 r = K.Rdot1 * w;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l) r[i] += K.Rdot2[i][k][l] * dw(l, k);
    return r;
}

Vec3 apply_B1(const KernelTensors& K, const Vec3& u, const Vec3& v) {
    Vec3 r = Vec3::Zero();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) r[i] += K.S[i][j][k][l] * (u[k] * v[l] - u[l] * v[k]);
    return r;
}

double apply_B2(const MetricSample& g, const Vec3& u, const Vec3& v) {
    return u.dot(g.g_lower * v);
}

// ============================================================================
// Boundary charts
// ============================================================================

Jet2 SphereChart::G(const V3<Jet2>& x) const {
    Jet2 r = sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    return inner_ ? R_ - r : r - R_;
}

Jet2 TorusChart::G(const V3<Jet2>& x) const {
    Jet2 rho = sqrt(x[0] * x[0] + x[1] * x[1]);
    Jet2 a = rho - R_;
    return sqrt(a * a + x[2] * x[2]) - r_;
}

NormalSample normal_sample(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt,
                           double t) {
    V3<Jet2> X{Jet2::variable(0, xt[0]), Jet2::variable(1, xt[1]), Jet2::variable(2, xt[2])};
    Jet2 G = chart.G(X);
    Vec3 grad(G.d(0), G.d(1), G.d(2));
    NormalSample ns;
    ns.E = grad.squaredNorm();
    if (!(std::sqrt(ns.E) >= 1e-10)) throw DegenerateLevelSet("|grad G| below 1e-10");
    PointFrame f = frame_at_ref(m, xt, t);
    Mat3 gup = f.Ainv * f.Ainv.transpose();
    Vec3 raw = gup * grad;
    ns.D = grad.dot(raw);
    ns.nu = raw.normalized();
    ns.nu_metric = raw / std::sqrt(ns.D);
    return ns;
}

Vec3 normal_at(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt, double t) {
    return normal_sample(chart, m, xt, t).nu;
}

Vec3 normal_metric_at(const BoundaryChart& chart, const DomainMotion& m, const Vec3& xt, double t) {
    return normal_sample(chart, m, xt, t).nu_metric;
}

// ============================================================================
// Identity verification
// ============================================================================

std::vector<Vec3> default_sample_points(int n, unsigned long long seed) {
    CounterRng rng(seed, 11);
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        d.normalize();
        pts.push_back(d * rng.uniform(1.2, 1.8));
    }
    return pts;
}

GeometryReport verify_geometry_identities(const DomainMotion& m, const std::vector<Vec3>& pts,
                                          const std::vector<double>& times) {
    GeometryReport rep;
    rep.motion = m.name();
    rep.analytic = m.analytic();
    rep.tolerance = m.analytic() ? 1e-7 : 1e-4;
    auto& R = rep.residuals;
    for (const char* key : {"round_trip", "kronecker", "det_constancy", "det_positive_violation",
                            "metric_inverse", "christoffel_trace", "christoffel_symmetry",
                            "dJ_ds", "dg_ds", "eq_3_5", "eq_3_6", "periodicity"})
        R[key] = 0.0;
    auto upd = [&](const char* k, double v) { R[k] = std::max(R[k], std::abs(v)); };

    const double T = m.period();
    for (double t : times) {
        const double Jref = m.jacobian(t);
        for (const Vec3& y : pts) {
            // round trip and periodicity
            V3<double> x = m.phi_inv(to_v3(y), t);
            V3<double> y2 = m.phi(x, t);
            upd("round_trip", (to_vec(y2) - y).norm() / (1.0 + y.norm()));
            V3<double> xp = m.phi_inv(to_v3(y), t + T);
            upd("periodicity", (to_vec(xp) - to_vec(x)).norm());

            PointGeometry pg = geometry_at_ref(m, y, t);
            MetricSample ms = metric_at_ref(m, y, t);

            // Kronecker duality with dphi/dx evaluated at x
            Jet2 tj;
            auto Xj = seed_point<2>(to_vec(x), t, tj);
            auto Yj = m.phi(Xj, tj);
            Mat3 B;
            for (int i = 0; i < 3; ++i)
                for (int l = 0; l < 3; ++l) B(i, l) = Yj[i].d(l);
            upd("kronecker", (pg.A * B - Mat3::Identity()).cwiseAbs().maxCoeff());

            upd("det_constancy", (pg.J - Jref) / Jref);
            if (!(1.0 / pg.J > 0.0)) upd("det_positive_violation", 1.0);
            upd("metric_inverse", (ms.g_upper * ms.g_lower - Mat3::Identity()).cwiseAbs().maxCoeff());

            for (int i = 0; i < 3; ++i) {
                double tr = 0.0;
                for (int l = 0; l < 3; ++l) tr += ms.christoffel[l](i, l);
                upd("christoffel_trace", tr);
                for (int k = 0; k < 3; ++k)
                    upd("christoffel_symmetry", ms.christoffel[k](i, (i + 1) % 3) -
                                                    ms.christoffel[k]((i + 1) % 3, i));
            }

            // dJ/ds and dg/ds against 4th-order differences in s of the frames
            const double hs = 1e-3;
            PointFrame fm2 = frame_at_ref(m, y, t - 2 * hs), fm1 = frame_at_ref(m, y, t - hs);
            PointFrame fp1 = frame_at_ref(m, y, t + hs), fp2 = frame_at_ref(m, y, t + 2 * hs);
            auto d4 = [&](double a2, double a1, double b1, double b2) {
                return (a2 - 8 * a1 + 8 * b1 - b2) / (12 * hs);
            };
            const double dJ_fd = d4(fm2.J, fm1.J, fp1.J, fp2.J);
            // formula: J * sum (dy^k/dx^l)(d2x^l/dy^k ds)
            double formula = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) formula += pg.Ainv(k, l) * pg.dA_ds(l, k);
            formula *= pg.J;
            upd("dJ_ds", (formula - dJ_fd) / (1.0 + std::abs(dJ_fd)));
            Mat3 gm2 = fm2.A.transpose() * fm2.A, gm1 = fm1.A.transpose() * fm1.A;
            Mat3 gp1 = fp1.A.transpose() * fp1.A, gp2 = fp2.A.transpose() * fp2.A;
            Mat3 dg_fd = (gm2 - 8 * gm1 + 8 * gp1 - gp2) / (12 * hs);
            upd("dg_ds", (ms.dg_lower_ds - dg_fd).cwiseAbs().maxCoeff() / (1.0 + dg_fd.norm()));

            // (3.5) and (3.6) with second derivatives of phi at x
            for (int i = 0; i < 3; ++i) {
                double s35 = 0.0;
                for (int k = 0; k < 3; ++k)
                    for (int l = 0; l < 3; ++l) s35 += pg.A(l, k) * Yj[k].d2(l, i);
                upd("eq_3_5", s35);
            }
            double lhs = 0.0, rhs = 0.0;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    lhs += pg.A(l, k) * Yj[k].d2(l, kTimeVar);
                    rhs -= pg.Ainv(k, l) * pg.dA_ds(l, k);
                }
            upd("eq_3_6", lhs - rhs);
        }
    }
    rep.pass = true;
    for (auto& [k, v] : R) {
        const double tol = (k == "round_trip" || k == "periodicity") ? 1e-10 : rep.tolerance;
        if (!(v <= tol)) rep.pass = false;
    }
    return rep;
}

}  // namespace mdhw
