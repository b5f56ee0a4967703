#include "mdhw/galerkin.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "mdhw/decomposition.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/jet.hpp"

namespace mdhw {

using Eigen::MatrixXd;

namespace {

const double kPi = std::acos(-1.0);

// potentials P_k as (component, exponents of y1 y2 y3)
struct Potential {
    int comp;
    std::array<int, 3> e;
    const char* label;
};

const Potential kPotentials[kMaxShellModes] = {
    {0, {0, 0, 0}, "e1"},       {1, {0, 0, 0}, "e2"},       {2, {0, 0, 0}, "e3"},
    {0, {0, 1, 0}, "y2 e1"},    {0, {0, 0, 1}, "y3 e1"},    {1, {1, 0, 0}, "y1 e2"},
    {1, {0, 0, 1}, "y3 e2"},    {2, {1, 0, 0}, "y1 e3"},    {2, {0, 1, 0}, "y2 e3"},
    {0, {1, 0, 0}, "y1 e1"},    {1, {0, 1, 0}, "y2 e2"},    {2, {1, 1, 0}, "y1 y2 e3"},
    {0, {0, 1, 1}, "y2 y3 e1"}, {1, {1, 0, 1}, "y3 y1 e2"}, {1, {2, 0, 0}, "y1^2 e2"},
    {2, {0, 2, 0}, "y2^2 e3"},  {0, {0, 0, 2}, "y3^2 e1"},  {2, {2, 0, 0}, "y1^2 e3"},
    {0, {0, 2, 0}, "y2^2 e1"},  {1, {0, 0, 2}, "y3^2 e2"},
};

Mat3 cross_matrix_x1x2() {
    Mat3 g = Mat3::Zero();
    g(0, 1) = -1.0;
    g(1, 0) = 1.0;
    return g;
}

Mat3 cross_matrix_x2x3() {
    Mat3 g = Mat3::Zero();
    g(1, 2) = -1.0;
    g(2, 1) = 1.0;
    return g;
}

// Phi(X): lower triangle with half the diagonal
MatrixXd lower_half(const MatrixXd& X) {
    MatrixXd L = X.triangularView<Eigen::StrictlyLower>();
    L.diagonal() = 0.5 * X.diagonal();
    return L;
}

// Simpson weights on the half-step stage grid covering [0, T]
double simpson_weight(int i, int n_stages, double dt) {
    if (i == 0 || i == n_stages - 1) return dt / 6.0;
    return (i % 2 == 1) ? 4.0 * dt / 6.0 : 2.0 * dt / 6.0;
}

}  // namespace

double sobolev_constant() { return std::pow(3.0, -0.5) * std::pow(2.0, 2.0 / 3.0) * std::pow(kPi, -2.0 / 3.0); }

ShellQuadrature make_shell_quadrature(double rho1, double rho0, int n_r, int n_theta, int n_phi) {
    if (!(rho1 > 0.0 && rho0 > rho1)) throw InvalidRadii("shell quadrature needs 0 < rho1 < rho0");
    if (n_r < 1 || n_theta < 1 || n_phi < 1) throw BadParameters("shell quadrature sizes must be positive");
    ShellQuadrature q;
    q.rho1 = rho1;
    q.rho0 = rho0;
    const GaussRule gr = gauss_legendre(n_r), gt = gauss_legendre(n_theta);
    const double hr = 0.5 * (rho0 - rho1);
    for (int i = 0; i < n_r; ++i) {
        const double r = rho1 + hr * (gr.x[i] + 1.0);
        for (int j = 0; j < n_theta; ++j) {
            const double c = gt.x[j], s = std::sqrt(1.0 - c * c);
            for (int k = 0; k < n_phi; ++k) {
                const double ph = 2.0 * kPi * (k + 0.5) / n_phi;
                q.points.emplace_back(r * s * std::cos(ph), r * s * std::sin(ph), r * c);
                q.weights.push_back(hr * gr.w[i] * r * r * gt.w[j] * 2.0 * kPi / n_phi);
            }
        }
    }
    return q;
}

namespace {

struct RawFields {
    std::vector<std::vector<Vec3>> value;
    std::vector<std::vector<Mat3>> jac;
};

RawFields eval_potentials(const ShellQuadrature& q, const std::vector<Potential>& pots) {
    const int nq = static_cast<int>(q.points.size()), n = static_cast<int>(pots.size());
    RawFields f;
    f.value.assign(nq, std::vector<Vec3>(n, Vec3::Zero()));
    f.jac.assign(nq, std::vector<Mat3>(n, Mat3::Zero()));
    for (int p = 0; p < nq; ++p) {
        const Vec3& y = q.points[p];
        std::array<Jet2, 3> Y{Jet2::variable(0, y[0]), Jet2::variable(1, y[1]), Jet2::variable(2, y[2])};
        const Jet2 r = sqrt(Y[0] * Y[0] + Y[1] * Y[1] + Y[2] * Y[2]);
        const Jet2 a = r - q.rho1, c = q.rho0 - r;
        const Jet2 B = a * a * c * c;
        for (int k = 0; k < n; ++k) {
            const Potential& P = pots[k];
            Jet2 mono(1.0);
            for (int v = 0; v < 3; ++v)
                for (int e = 0; e < P.e[v]; ++e) mono = mono * Y[v];
            const Jet2 V = B * mono;  // only component P.comp is nonzero
            // curl(V e_c): u_{c+1} = d_{c+2} V, u_{c+2} = -d_{c+1} V
            const int c1 = (P.comp + 1) % 3, c2 = (P.comp + 2) % 3;
            f.value[p][k][c1] = V.d(c2);
            f.value[p][k][c2] = -V.d(c1);
            for (int l = 0; l < 3; ++l) {
                f.jac[p][k](c1, l) = V.d2(c2, l);
                f.jac[p][k](c2, l) = -V.d2(c1, l);
            }
        }
    }
    return f;
}

std::vector<Potential> potential_pool(int degree) {
    std::vector<Potential> pool;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a)
            for (int b = d - a; b >= 0; --b)
                for (int comp = 0; comp < 3; ++comp) pool.push_back({comp, {a, b, d - a - b}, ""});
    return pool;
}

}  // namespace

int max_shell_modes(BasisOrdering ordering) {
    if (ordering == BasisOrdering::Potentials) return kMaxShellModes;
    // 3 binom(d + 3, 3) potentials minus the null fields curl(B grad g), g = r^2, r^4 ...
    return 3 * 20 - 2;
}

ShellBasis make_shell_basis(const ShellQuadrature& q, int m, BasisOrdering ordering) {
    const int mmax = max_shell_modes(ordering);
    if (m < 1 || m > mmax) {
        std::ostringstream os;
        os << "Galerkin dimension m = " << m << " outside [1, " << mmax << "]";
        throw BadParameters(os.str());
    }
    ShellBasis b;
    b.m = m;
    if (ordering == BasisOrdering::Potentials) {
        const std::vector<Potential> pots(kPotentials, kPotentials + m);
        RawFields f = eval_potentials(q, pots);
        for (int k = 0; k < m; ++k) b.labels.emplace_back(kPotentials[k].label);
        b.value = std::move(f.value);
        b.jacobian = std::move(f.jac);
        return b;
    }
    // Ritz vectors of the reference Stokes problem in the span of the pool, ascending
    // on a fixed rule, so the fields do not depend on the evaluation points
    const std::vector<Potential> pool = potential_pool(3);
    const ShellQuadrature rq = make_shell_quadrature(q.rho1, q.rho0, 10, 10, 20);
    const RawFields rf = eval_potentials(rq, pool);
    const int n = static_cast<int>(pool.size()), nq = static_cast<int>(q.points.size());
    MatrixXd G = MatrixXd::Zero(n, n), S = MatrixXd::Zero(n, n);
    for (size_t p = 0; p < rq.points.size(); ++p)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                G(i, j) += rq.weights[p] * rf.value[p][i].dot(rf.value[p][j]);
                S(i, j) += rq.weights[p] * (rf.jac[p][i].array() * rf.jac[p][j].array()).sum();
            }
    G = G.selfadjointView<Eigen::Lower>();
    S = S.selfadjointView<Eigen::Lower>();
    // drop the null directions of the pool, then solve the reduced eigenproblem
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eg(G);
    const double gmax = eg.eigenvalues().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (eg.eigenvalues()[i] > 1e-10 * gmax) keep.push_back(i);
    if (static_cast<int>(keep.size()) < m) throw DependentBasis("potential pool spans fewer than m fields");
    MatrixXd Z(n, keep.size());
    for (size_t j = 0; j < keep.size(); ++j)
        Z.col(j) = eg.eigenvectors().col(keep[j]) / std::sqrt(eg.eigenvalues()[keep[j]]);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(Z.transpose() * S * Z);
    MatrixXd V = Z * es.eigenvectors();
    for (int k = 0; k < V.cols(); ++k) {
        // fix the sign by the largest coefficient
        Eigen::Index i;
        V.col(k).cwiseAbs().maxCoeff(&i);
        if (V(i, k) < 0.0) V.col(k) *= -1.0;
    }
    for (int k = 0; k < m; ++k) {
        std::ostringstream os;
        os << "ritz " << k + 1 << " (" << es.eigenvalues()[k] << ")";
        b.labels.push_back(os.str());
    }
    const RawFields f = eval_potentials(q, pool);
    b.value.assign(nq, std::vector<Vec3>(m, Vec3::Zero()));
    b.jacobian.assign(nq, std::vector<Mat3>(m, Mat3::Zero()));
    for (int p = 0; p < nq; ++p)
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < n; ++i) {
                if (V(i, k) == 0.0) continue;
                b.value[p][k] += V(i, k) * f.value[p][i];
                b.jacobian[p][k] += V(i, k) * f.jac[p][i];
            }
    return b;
}

SpaceTimeField zero_field() {
    return {[](const Vec3&, double) { return Vec3::Zero().eval(); },
            [](const Vec3&, double) { return Mat3::Zero().eval(); },
            [](const Vec3&, double) { return Vec3::Zero().eval(); }};
}

SpaceTimeField radial_lift(double flux) {
    const double c = -flux / (4.0 * kPi);
    return {[c](const Vec3& x, double) -> Vec3 { return c * x / std::pow(x.norm(), 3); },
            [c](const Vec3& x, double) -> Mat3 {
                const double r = x.norm();
                return c * (Mat3::Identity() / std::pow(r, 3) - 3.0 * x * x.transpose() / std::pow(r, 5));
            },
            [](const Vec3&, double) { return Vec3::Zero().eval(); }};
}

SpaceTimeField swirl_forcing(double amplitude, double period) {
    const double w = 2.0 * kPi / period;
    const Mat3 G1 = cross_matrix_x1x2(), G2 = cross_matrix_x2x3();
    auto grad = [=](double t) -> Mat3 {
        return amplitude * ((1.0 + 0.5 * std::sin(w * t)) * G1 + 0.5 * std::cos(w * t) * G2);
    };
    auto grad_dt = [=](double t) -> Mat3 {
        return amplitude * (0.5 * w * std::cos(w * t) * G1 - 0.5 * w * std::sin(w * t) * G2);
    };
    return {[grad](const Vec3& x, double t) -> Vec3 { return grad(t) * x; },
            [grad](const Vec3&, double t) -> Mat3 { return grad(t); },
            [grad_dt](const Vec3& x, double t) -> Vec3 { return grad_dt(t) * x; }};
}

SpaceTimeField steady_swirl(double amplitude) {
    const Mat3 G = amplitude * cross_matrix_x1x2();
    return {[G](const Vec3& x, double) -> Vec3 { return G * x; }, [G](const Vec3&, double) -> Mat3 { return G; },
            [](const Vec3&, double) { return Vec3::Zero().eval(); }};
}

Orthonormalization orthonormalize_basis_at(const MatrixXd& G, const MatrixXd& G_dot) {
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(G, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > 1e12) {
        std::ostringstream os;
        os << "Gram matrix condition " << (lo > 0.0 ? hi / lo : INFINITY) << " exceeds 1e12";
        throw DependentBasis(os.str());
    }
    const Eigen::LLT<MatrixXd> llt(G);
    const MatrixXd L = llt.matrixL();
    const int m = static_cast<int>(G.rows());
    Orthonormalization o;
    o.mu = L.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(m, m));
    const MatrixXd X = o.mu * G_dot * o.mu.transpose();
    const MatrixXd L_dot = L * lower_half(X);
    o.mu_dot = -o.mu * L_dot * o.mu;
    return o;
}

StageData assemble_stage(const GalerkinProblem& p, const ShellQuadrature& q, const ShellBasis& basis, double t) {
    const int m = basis.m, nq = static_cast<int>(q.points.size());
    // physical fields of Upsilon: rows 3p + i (values, rates), 9p + 3i + j (gradients)
    MatrixXd U(3 * nq, m), Ut(3 * nq, m), Ug(9 * nq, m);
    VectorXd w3(3 * nq), w9(9 * nq);
    std::vector<Vec3> bv(nq), bt(nq), fv(nq);
    std::vector<Mat3> bg(nq);
    std::vector<double> wq(nq);
    for (int a = 0; a < nq; ++a) {
        const PointGeometry g = geometry_at_ref(*p.motion, q.points[a], t);
        const Vec3 ydot = -g.Ainv * g.dx_ds;
        wq[a] = q.weights[a] * g.J;
        w3.segment<3>(3 * a).setConstant(wq[a]);
        w9.segment<9>(9 * a).setConstant(wq[a]);
        for (int k = 0; k < m; ++k) {
            const Vec3& ut = basis.value[a][k];
            Mat3 dUdy = g.A * basis.jacobian[a][k];
            for (int r = 0; r < 3; ++r) dUdy.row(r) += (g.H[r] * ut).transpose();
            const Mat3 grad = dUdy * g.Ainv;
            U.block<3, 1>(3 * a, k) = g.A * ut;
            Ut.block<3, 1>(3 * a, k) = g.dA_ds * ut + dUdy * ydot;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) Ug(9 * a + 3 * i + j, k) = grad(i, j);
        }
        bv[a] = p.lift.value(g.x, t);
        bg[a] = p.lift.grad(g.x, t);
        bt[a] = p.lift.dt(g.x, t);
        fv[a] = p.forcing.value(g.x, t);
    }

    StageData s;
    s.t = t;
    s.G = U.transpose() * w3.asDiagonal() * U;
    const MatrixXd D = Ut.transpose() * w3.asDiagonal() * U;
    s.orth = orthonormalize_basis_at(s.G, D + D.transpose());
    const MatrixXd& mu = s.orth.mu;
    const MatrixXd Psi = U * mu.transpose();
    const MatrixXd Psit = Ut * mu.transpose() + U * s.orth.mu_dot.transpose();
    const MatrixXd Psig = Ug * mu.transpose();

    const MatrixXd gram = Psi.transpose() * w3.asDiagonal() * Psi;
    s.orth_defect = (gram - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    s.C = Psit.transpose() * w3.asDiagonal() * Psi;
    s.S = Psig.transpose() * w9.asDiagonal() * Psig;

    // b-dependent convection, data, and the quadratic tensor
    MatrixXd bgradpsi(3 * nq, m), psigradb(3 * nq, m), Z(3 * nq, m);
    VectorXd rhs_field(3 * nq), bgrad_flat(9 * nq);
    double l3 = 0.0;
    for (int a = 0; a < nq; ++a) {
        for (int k = 0; k < m; ++k) {
            Mat3 gk;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) gk(i, j) = Psig(9 * a + 3 * i + j, k);
            const Vec3 pk = Psi.block<3, 1>(3 * a, k);
            bgradpsi.block<3, 1>(3 * a, k) = gk * bv[a];
            psigradb.block<3, 1>(3 * a, k) = bg[a] * pk;
            Z.block<3, 1>(3 * a, k) = gk.transpose() * bv[a];
        }
        Vec3 rf = fv[a] - bt[a];
        if (p.convection) rf -= bg[a] * bv[a];
        rhs_field.segment<3>(3 * a) = rf;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) bgrad_flat[9 * a + 3 * i + j] = bg[a](i, j);
        l3 += wq[a] * std::pow(bv[a].norm(), 3);
    }
    s.lift_L3 = std::cbrt(l3);
    s.F = Psi.transpose() * w3.asDiagonal() * rhs_field - Psig.transpose() * w9.asDiagonal() * bgrad_flat;

    s.conv = MatrixXd::Zero(m, m);
    s.Q.assign(static_cast<size_t>(m) * m * m, 0.0);
    if (p.convection) {
        // Nbu(j, k) = (b . grad psi_j, psi_k), Nub(j, k) = (psi_j . grad b, psi_k), Qb(j, k) = (psi_j . grad psi_k, b)
        const MatrixXd Nbu = bgradpsi.transpose() * w3.asDiagonal() * Psi;
        const MatrixXd Nub = psigradb.transpose() * w3.asDiagonal() * Psi;
        const MatrixXd Qb = Psi.transpose() * w3.asDiagonal() * Z;
        s.conv = 0.5 * (Nbu - Nbu.transpose()).transpose() + 0.5 * (Nub - Qb).transpose();

        // T(j, l, k) = (psi_j . grad psi_l, psi_k) via V_jl = grad psi_l psi_j
        MatrixXd V(3 * nq, m * m);
        for (int a = 0; a < nq; ++a)
            for (int l = 0; l < m; ++l) {
                Mat3 gl;
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) gl(i, j) = Psig(9 * a + 3 * i + j, l);
                for (int j = 0; j < m; ++j) V.block<3, 1>(3 * a, j * m + l) = gl * Psi.block<3, 1>(3 * a, j);
            }
        const MatrixXd T = V.transpose() * w3.asDiagonal() * Psi;  // (j m + l, k)
        for (int k = 0; k < m; ++k)
            for (int j = 0; j < m; ++j)
                for (int l = 0; l < m; ++l)
                    s.Q[(static_cast<size_t>(k) * m + j) * m + l] = -0.5 * (T(j * m + l, k) - T(j * m + k, l));
    }
    s.A = -s.C.transpose() - s.S - s.conv;

    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.S, Eigen::EigenvaluesOnly);
    s.lambda_min = es.eigenvalues().minCoeff();
    s.F_dual_sq = s.F.dot(s.S.llt().solve(s.F));
    return s;
}

GalerkinSystem::GalerkinSystem(GalerkinProblem p, double t_start) : p_(std::move(p)), t0_(t_start) {
    if (!p_.motion) throw BadParameters("Galerkin problem needs a motion");
    if (!(p_.period > 0.0)) throw BadParameters("period must be positive");
    if (p_.steps < 64) throw BadParameters("dt must not exceed T/64");
    quad_ = make_shell_quadrature(p_.rho1, p_.rho0, p_.n_r, p_.n_theta, p_.n_phi);
    basis_ = make_shell_basis(quad_, p_.m, p_.ordering);
    // RK4 is stable for |z| <= 2.78 on the negative axis; refine dt when the Stokes block is too stiff
    const StageData first = assemble_stage(p_, quad_, basis_, t0_);
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(first.S, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    while (lmax * p_.period / p_.steps > 2.5) p_.steps *= 2;
    const int n = 2 * p_.steps + 1;
    stages_.reserve(n);
    stages_.push_back(first);
    for (int i = 1; i < n; ++i) stages_.push_back(assemble_stage(p_, quad_, basis_, t0_ + 0.5 * i * dt()));
}

VectorXd GalerkinSystem::rhs(const VectorXd& h, int stage) const {
    const StageData& s = stages_.at(stage);
    VectorXd out = s.A * h + s.F;
    if (p_.convection) {
        const int m = p_.m;
        for (int k = 0; k < m; ++k) {
            double acc = 0.0;
            const double* Qk = s.Q.data() + static_cast<size_t>(k) * m * m;
            for (int j = 0; j < m; ++j) {
                double row = 0.0;
                for (int l = 0; l < m; ++l) row += Qk[j * m + l] * h[l];
                acc += row * h[j];
            }
            out[k] += acc;
        }
    }
    return out;
}

TrajectoryState integrate(const GalerkinSystem& sys, const VectorXd& a, int periods, double margin) {
    if (a.size() != sys.m()) throw BadParameters("initial coefficients have the wrong size");
    if (periods < 1) throw BadParameters("periods must be positive");
    if (!(margin < 1.0)) throw BadParameters("smallness margin must be below 1");
    const int n = sys.steps();
    const double dt = sys.dt();
    TrajectoryState tr;
    tr.times.push_back(sys.t_start());
    tr.h.push_back(a);
    for (int i = 0; i < sys.num_stages(); ++i) {
        const MatrixXd& C = sys.stage(i).C;
        tr.max_antisymmetry_defect = std::max(tr.max_antisymmetry_defect, (C + C.transpose()).cwiseAbs().maxCoeff());
    }
    auto split = [&](const VectorXd& h, int st, double& diss, double& conv, double& src) {
        const StageData& s = sys.stage(st);
        diss = h.dot(s.S * h);
        conv = h.dot(s.conv * h);
        src = s.F.dot(h);
    };
    const double limit = 1e6 * (a.squaredNorm() + 1.0);
    double source_bound = 0.0;
    VectorXd h = a;
    VectorXd k1 = sys.rhs(h, 0);
    for (int per = 0; per < periods; ++per)
        for (int step = 0; step < n; ++step) {
            const int i0 = 2 * step, i1 = i0 + 1, i2 = i0 + 2;
            const VectorXd k2 = sys.rhs(h + 0.5 * dt * k1, i1);
            const VectorXd k3 = sys.rhs(h + 0.5 * dt * k2, i1);
            const VectorXd k4 = sys.rhs(h + dt * k3, i2);
            const VectorXd h1 = h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            const VectorXd k1_next = sys.rhs(h1, i2);

            EnergyStep e;
            e.t = sys.t_start() + (per * n + step + 1) * dt;
            e.kinetic = 0.5 * h1.squaredNorm();
            const VectorXd hm = 0.5 * (h + h1) + dt / 8.0 * (k1 - k1_next);
            double d0, c0, s0, dm, cm, sm, d1, c1, s1;
            split(h, i0, d0, c0, s0);
            split(hm, i1, dm, cm, sm);
            split(h1, i2, d1, c1, s1);
            e.dissipation = dt / 6.0 * (d0 + 4.0 * dm + d1);
            e.convective = dt / 6.0 * (c0 + 4.0 * cm + c1);
            e.source = dt / 6.0 * (s0 + 4.0 * sm + s1);
            const double dE = e.kinetic - 0.5 * h.squaredNorm();
            const double scale = e.kinetic + 0.5 * h.squaredNorm() + std::abs(e.dissipation) +
                                 std::abs(e.convective) + std::abs(e.source);
            e.edi_defect = scale > 0.0 ? std::abs(dE + e.dissipation + e.convective - e.source) / scale : 0.0;
            const double mult = 1.0 / (1.0 - margin);
            e.bound_K = dt / 6.0 * mult *
                        (sys.stage(i0).F_dual_sq + 4.0 * sys.stage(i1).F_dual_sq + sys.stage(i2).F_dual_sq);
            source_bound += e.bound_K;
            tr.max_edi_defect = std::max(tr.max_edi_defect, e.edi_defect);
            if (!std::isfinite(e.kinetic) || e.kinetic > limit + 1e6 * source_bound) {
                std::ostringstream os;
                os << "kinetic energy " << e.kinetic << " at t = " << e.t << " exceeds the blow-up bound";
                throw BlowupDetected(os.str());
            }
            tr.energy.push_back(e);
            tr.times.push_back(e.t);
            tr.h.push_back(h1);
            h = h1;
            k1 = k1_next;
        }
    return tr;
}

VectorXd poincare_map(const GalerkinSystem& sys, const VectorXd& a) { return integrate(sys, a).h.back(); }

SmallnessReport check_smallness(const GalerkinSystem& sys) {
    SmallnessReport r;
    for (int i = 0; i < sys.num_stages(); ++i) {
        r.times.push_back(sys.stage(i).t);
        r.l3_norms.push_back(sys.stage(i).lift_L3);
        r.margin = std::max(r.margin, sobolev_constant() * sys.stage(i).lift_L3);
    }
    r.pass = r.margin < 1.0;
    return r;
}

BallRadius ball_radius(const GalerkinSystem& sys) {
    BallRadius b;
    b.margin = check_smallness(sys).margin;
    if (!(b.margin < 1.0)) {
        std::ostringstream os;
        os << "smallness margin " << b.margin << " is not below 1";
        throw BadParameters(os.str());
    }
    b.lambda_min = INFINITY;
    for (int i = 0; i < sys.num_stages(); ++i) b.lambda_min = std::min(b.lambda_min, sys.stage(i).lambda_min);
    b.gamma = (1.0 - b.margin) * b.lambda_min;
    b.multiplier = 1.0 / (1.0 - b.margin);
    const double T = sys.problem().period, h = 0.5 * sys.dt();
    const int n = sys.num_stages();
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
        const double tau = i * h;
        const double twoK = b.multiplier * sys.stage(i).F_dual_sq;
        b.integral_2K += simpson_weight(i, n, sys.dt()) * twoK;
        integral += simpson_weight(i, n, sys.dt()) * std::exp(-b.gamma * (T - tau)) * twoK;
    }
    b.R = std::sqrt(integral / (1.0 - std::exp(-b.gamma * T)));
    return b;
}

double annulus_l3_closed_form(double R1, double R0, double flux) {
    if (!(R1 > 0.0 && R0 > R1)) throw InvalidRadii("annulus needs 0 < R1 < R0");
    return std::pow(2.0, -4.0 / 3.0) * std::pow(3.0, -1.0 / 3.0) * std::pow(kPi, -2.0 / 3.0) *
           std::cbrt(std::pow(R1, -3) - std::pow(R0, -3)) * std::abs(flux);
}

double annulus_l3_printed(double R1, double R0, double flux) {
    return std::pow(2.0, 2.0 / 3.0) * annulus_l3_closed_form(R1, R0, flux);
}

double face_field_l3(const ReferenceMesh& m, const DomainMotion& motion, double t, const VectorXd& dofs) {
    const TetQuadrature& tq = tet_quadrature();
    double acc = 0.0;
    for (int c = 0; c < m.nt(); ++c) {
        const auto& T = m.tets[c];
        for (int i = 0; i < 4; ++i) {
            const Eigen::Vector4d& l = tq.bary[i];
            const Vec3 y = l[0] * m.vertices[T[0]] + l[1] * m.vertices[T[1]] + l[2] * m.vertices[T[2]] +
                           l[3] * m.vertices[T[3]];
            const PointFrame f = frame_at_ref(motion, y, t);
            const Vec3 u = f.A * eval_face_field(m, dofs, c, l);
            acc += tq.weight[i] * m.tet_volume[c] * f.J * std::pow(u.norm(), 3);
        }
    }
    return std::cbrt(acc);
}

SmallnessReport check_smallness(const ReferenceMesh& m, const DomainMotion& motion, const std::vector<double>& times,
                                const VectorXd& fluxes) {
    SmallnessReport r;
    for (double t : times) {
        r.times.push_back(t);
        double l3 = 0.0;
        if (fluxes.size() > 0 && fluxes.cwiseAbs().maxCoeff() > 0.0) {
            const WeightedOperators ops = assemble_weighted(m, motion, t);
            const HarmonicBasis basis = gram_schmidt_vhar(solve_harmonic_potentials(m, ops), ops);
            if (fluxes.size() != basis.K()) throw BadParameters("one flux per inner boundary component expected");
            const VectorXd c = basis.alpha * fluxes;
            VectorXd h = VectorXd::Zero(ops.nf());
            for (int k = 0; k < basis.K(); ++k) h += c[k] * basis.eta[k].values;
            l3 = face_field_l3(m, motion, t, h);
        }
        r.l3_norms.push_back(l3);
        r.margin = std::max(r.margin, sobolev_constant() * l3);
    }
    r.pass = r.margin < 1.0;
    return r;
}

PeriodicResult find_periodic(const GalerkinSystem& sys, const VectorXd& a0, double R, const FixedPointOptions& opts) {
    PeriodicResult out;
    out.ball_R = R;
    VectorXd a = a0;
    bool anderson = false;
    std::vector<VectorXd> hist_a, hist_f;
    for (int it = 0; it < opts.max_iters; ++it) {
        TrajectoryState tr = integrate(sys, a);
        const VectorXd Pa = tr.h.back();
        const VectorXd f = Pa - a;
        const double res = f.norm();
        out.residual_history.push_back(res);
        out.iterate_norms.push_back(a.norm());
        out.image_norms.push_back(Pa.norm());
        if (a.norm() <= R && Pa.norm() > R * (1.0 + 1e-3)) out.ball_ok = false;
        out.a = a;
        out.trajectory = std::move(tr);
        if (res <= opts.tol) {
            out.converged = true;
            break;
        }
        if (it > 0 && !anderson && res > opts.stall_ratio * out.residual_history[it - 1]) anderson = true;
        hist_a.push_back(a);
        hist_f.push_back(f);
        if (static_cast<int>(hist_a.size()) > opts.anderson_depth + 1) {
            hist_a.erase(hist_a.begin());
            hist_f.erase(hist_f.begin());
        }
        if (anderson && hist_a.size() >= 2) {
            const int k = static_cast<int>(hist_a.size()) - 1;
            MatrixXd dF(a.size(), k), dA(a.size(), k);
            for (int j = 0; j < k; ++j) {
                dF.col(j) = hist_f[j + 1] - hist_f[j];
                dA.col(j) = hist_a[j + 1] - hist_a[j];
            }
            const VectorXd g = dF.colPivHouseholderQr().solve(f);
            a = a - dA * g + (f - dF * g);
            out.method.emplace_back("anderson");
        } else {
            a = a + opts.damping * f;
            out.method.emplace_back("picard");
        }
    }
    if (out.method.size() < out.residual_history.size()) out.method.emplace_back("converged");
    if (!out.converged && opts.throw_on_failure) {
        std::ostringstream os;
        os << "fixed point not reached after " << opts.max_iters << " iterations, residuals:";
        for (double r : out.residual_history) os << ' ' << r;
        throw NoConvergence(os.str());
    }
    return out;
}

VectorXd steady_solution(const GalerkinSystem& sys, double tol, int max_iters) {
    const int m = sys.m();
    const StageData& s = sys.stage(0);
    VectorXd h = VectorXd::Zero(m);
    for (int it = 0; it < max_iters; ++it) {
        const VectorXd r = sys.rhs(h, 0);
        if (r.norm() <= tol * std::max(1.0, s.F.norm())) return h;
        MatrixXd Jac = s.A;
        if (sys.problem().convection)
            for (int k = 0; k < m; ++k)
                for (int j = 0; j < m; ++j)
                    for (int l = 0; l < m; ++l) {
                        const size_t kj = (static_cast<size_t>(k) * m + j) * m + l;
                        const size_t kl = (static_cast<size_t>(k) * m + l) * m + j;
                        Jac(k, j) += (s.Q[kj] + s.Q[kl]) * h[l];
                    }
        h -= Jac.partialPivLu().solve(r);
    }
    throw NoConvergence("steady Galerkin Newton iteration did not converge");
}

// ---- solenoidal extension ----

VectorXd boundary_trace(const ReferenceMesh& m, const DomainMotion& motion, double t, const VectorFn& beta) {
    const VectorXd all = interpolate_face(m, motion, t, beta);
    VectorXd out = VectorXd::Zero(m.nf());
    for (int f : m.boundary_faces) out[f] = all[f];
    return out;
}

BEpsilon build_b_epsilon(const ReferenceMesh& m, const WeightedOperators& ops, const VectorXd& beta_trace,
                         const HarmonicBasis& basis, const CutPotentialBasis& cuts, const CutoffProfile& theta,
                         const BEpsilonOptions& opts) {
    if (beta_trace.size() != m.nf()) throw BadParameters("boundary data must be a face vector");
    std::vector<bool> boundary(m.nf(), false);
    for (int f : m.boundary_faces) boundary[f] = true;
    VectorXd b0 = VectorXd::Zero(m.nf());
    double scale = 0.0, total_abs = 0.0;
    for (int f : m.boundary_faces) {
        b0[f] = beta_trace[f];
        scale = std::max(scale, std::abs(b0[f]));
        total_abs += std::abs(b0[f]);
    }
    BEpsilon out;
    auto zero = [&](FieldKind k) { return FEField{k, VectorXd::Zero(FEField::size_for(k, m))}; };
    if (scale == 0.0) {
        out.b_ext = out.h = out.rot_part = out.b_eps = zero(FieldKind::Face);
        out.w = zero(FieldKind::Edge);
        out.coeffs_h = VectorXd::Zero(basis.K());
        return out;
    }
    const VectorXd div0 = ops.d2 * b0;
    const double total = div0.sum();
    if (std::abs(total) > opts.gfc_tol * total_abs) {
        std::ostringstream os;
        os << "total boundary flux " << total << " violates the zero-flux condition";
        throw FluxViolation(os.str());
    }

    // interior faces: least M2-norm correction c with d2 (b0 + c) = 0
    std::vector<int> interior;
    std::vector<int> slot(m.nf(), -1);
    for (int f = 0; f < m.nf(); ++f)
        if (!boundary[f]) {
            slot[f] = static_cast<int>(interior.size());
            interior.push_back(f);
        }
    const int ni = static_cast<int>(interior.size());
    SpMat P(ni, m.nf());
    {
        std::vector<Eigen::Triplet<double>> tr;
        for (int i = 0; i < ni; ++i) tr.emplace_back(i, interior[i], 1.0);
        P.setFromTriplets(tr.begin(), tr.end());
    }
    const SpMat MII = P * ops.M2 * P.transpose();
    const SpMat D2I = ops.d2 * P.transpose();
    const VectorXd Minv = inverse_diagonal(MII);
    CGOptions inner;
    inner.rel_tol = 1e-13;
    inner.context = "b_eps extension (mass solve)";
    VectorXd tmp = VectorXd::Zero(ni);
    auto solve_mass = [&](const VectorXd& r) {
        pcg([&](const VectorXd& v, VectorXd& o) { o.noalias() = MII * v; }, r, tmp, Minv, inner);
        return tmp;
    };
    const VectorXd rI = P * (ops.M2 * b0);
    VectorXd rhs = div0 - D2I * solve_mass(rI);
    rhs.array() -= rhs.mean();
    auto S = [&](const VectorXd& x, VectorXd& y) { y = D2I * solve_mass(D2I.transpose() * x); };
    VectorXd diag = VectorXd::Zero(ops.nc());
    for (int k = 0; k < D2I.outerSize(); ++k)
        for (SpMat::InnerIterator it(D2I, k); it; ++it) diag[it.row()] += it.value() * it.value() * Minv[it.col()];
    VectorXd lam = VectorXd::Zero(ops.nc());
    CGOptions outer;
    outer.rel_tol = opts.rel_tol;
    outer.context = "b_eps extension";
    pcg(S, rhs, lam, diag.cwiseInverse(), outer);
    const VectorXd c = -solve_mass(rI + D2I.transpose() * lam);
    out.b_ext = {FieldKind::Face, b0 + P.transpose() * c};

    DecompositionOptions dopts;
    dopts.rel_tol = opts.rel_tol;
    const SolenoidalParts parts = decompose_solenoidal(out.b_ext, basis, cuts, ops, dopts);
    out.h = parts.h;
    out.w = parts.w;
    out.coeffs_h = parts.coeffs_h;

    VectorXd tw(m.ne());
    const VectorXd& th = theta.theta.values;
    for (int e = 0; e < m.ne(); ++e) tw[e] = 0.5 * (th[m.edges[e][0]] + th[m.edges[e][1]]) * parts.w.values[e];
    out.rot_part = {FieldKind::Face, (ops.d1 * tw) / ops.J};
    out.b_eps = {FieldKind::Face, out.h.values + out.rot_part.values};

    for (int f : m.boundary_faces)
        out.trace_error = std::max(out.trace_error, std::abs(out.b_eps.values[f] - b0[f]) / scale);
    out.div_defect = (ops.d2 * out.b_eps.values).cwiseAbs().maxCoeff() / scale;
    return out;
}

}  // namespace mdhw
