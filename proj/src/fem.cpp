#include "mdhw/fem.hpp"

#include <algorithm>
#include <cmath>

#include "mdhw/errors.hpp"
#include "mdhw/solvers.hpp"

namespace mdhw {

using Triplets = std::vector<Eigen::Triplet<double>>;

const int kLocalEdges[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};

std::string to_string(FieldKind k) {
    switch (k) {
        case FieldKind::NodalScalar: return "nodal_scalar";
        case FieldKind::NodalVector: return "nodal_vector";
        case FieldKind::Edge: return "edge";
        case FieldKind::Face: return "face";
        case FieldKind::Cell: return "cell";
    }
    return "unknown";
}

int FEField::size_for(FieldKind kind, const ReferenceMesh& m) {
    switch (kind) {
        case FieldKind::NodalScalar: return m.nv();
        case FieldKind::NodalVector: return 3 * m.nv();
        case FieldKind::Edge: return m.ne();
        case FieldKind::Face: return m.nf();
        case FieldKind::Cell: return m.nt();
    }
    return 0;
}

const TetQuadrature& tet_quadrature() {
    static const TetQuadrature q = [] {
        TetQuadrature r;
        const double a = 0.5854101966249685, b = 0.1381966011250105;
        for (int i = 0; i < 4; ++i) {
            Eigen::Vector4d l = Eigen::Vector4d::Constant(b);
            l[i] = a;
            r.bary[i] = l;
            r.weight[i] = 0.25;
        }
        return r;
    }();
    return q;
}

namespace {

struct TriRule {
    std::vector<Eigen::Vector3d> bary;
    std::vector<double> weight;
};

const TriRule& tri7() {
    static const TriRule r = [] {
        TriRule t;
        t.bary.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
        t.weight.push_back(0.225);
        const double a1 = 0.0597158717897698, b1 = 0.4701420641051151, w1 = 0.1323941527885062;
        const double a2 = 0.7974269853530873, b2 = 0.1012865073234563, w2 = 0.1259391805448271;
        for (auto [a, b, w] : {std::tuple{a1, b1, w1}, std::tuple{a2, b2, w2}}) {
            t.bary.push_back({a, b, b});
            t.bary.push_back({b, a, b});
            t.bary.push_back({b, b, a});
            for (int k = 0; k < 3; ++k) t.weight.push_back(w);
        }
        return t;
    }();
    return r;
}

Vec3 point_in(const ReferenceMesh& m, int t, const Eigen::Vector4d& l) {
    const auto& v = m.tets[t];
    return l[0] * m.vertices[v[0]] + l[1] * m.vertices[v[1]] + l[2] * m.vertices[v[2]] +
           l[3] * m.vertices[v[3]];
}

Mat3 dg_upper(const Mat3& Ainv, const Mat3& gup, const Mat3& dA) {
    return -Ainv * dA * gup - gup * dA.transpose() * Ainv.transpose();
}

}  // namespace

// ============================================================================
// Local basis
// ============================================================================

TetBasis::TetBasis(const ReferenceMesh& m, int t) {
    grad = m.bary_gradients(t);
    volume = m.tet_volume[t];
    const auto& v = m.tets[t];
    for (int e = 0; e < 6; ++e) edge_sign[e] = v[kLocalEdges[e][0]] < v[kLocalEdges[e][1]] ? 1 : -1;
    for (int i = 0; i < 4; ++i) {
        std::array<int, 3> f{};
        int k = 0;
        for (int j = 0; j < 4; ++j)
            if (j != i) f[k++] = j;
        std::sort(f.begin(), f.end(), [&](int a, int b) { return v[a] < v[b]; });
        face_local[i] = f;
    }
}

Eigen::Matrix<double, 6, 3> TetBasis::edge_values(const Eigen::Vector4d& l) const {
    Eigen::Matrix<double, 6, 3> W;
    for (int e = 0; e < 6; ++e) {
        const int i = kLocalEdges[e][0], j = kLocalEdges[e][1];
        W.row(e) = edge_sign[e] * (l[i] * grad.row(j) - l[j] * grad.row(i));
    }
    return W;
}

Eigen::Matrix<double, 6, 3> TetBasis::edge_curls() const {
    Eigen::Matrix<double, 6, 3> C;
    for (int e = 0; e < 6; ++e) {
        const int i = kLocalEdges[e][0], j = kLocalEdges[e][1];
        const Vec3 gi = grad.row(i).transpose(), gj = grad.row(j).transpose();
        C.row(e) = (2.0 * edge_sign[e]) * gi.cross(gj).transpose();
    }
    return C;
}

Eigen::Matrix<double, 4, 3> TetBasis::face_values(const Eigen::Vector4d& l) const {
    Eigen::Matrix<double, 4, 3> F;
    for (int i = 0; i < 4; ++i) {
        const auto [a, b, c] = face_local[i];
        const Vec3 ga = grad.row(a).transpose(), gb = grad.row(b).transpose(),
                   gc = grad.row(c).transpose();
        F.row(i) = 2.0 * (l[a] * gb.cross(gc) + l[b] * gc.cross(ga) + l[c] * ga.cross(gb)).transpose();
    }
    return F;
}

Eigen::Vector4d TetBasis::face_divs() const {
    Eigen::Vector4d d;
    for (int i = 0; i < 4; ++i) {
        const auto [a, b, c] = face_local[i];
        const Vec3 ga = grad.row(a).transpose(), gb = grad.row(b).transpose(),
                   gc = grad.row(c).transpose();
        d[i] = 6.0 * ga.dot(gb.cross(gc));
    }
    return d;
}

// ============================================================================
// Incidence
// ============================================================================

Incidence build_incidence(const ReferenceMesh& m) {
    Incidence I;
    Triplets t0, t1, t2;
    t0.reserve(2 * m.ne());
    for (int e = 0; e < m.ne(); ++e) {
        t0.emplace_back(e, m.edges[e][0], -1.0);
        t0.emplace_back(e, m.edges[e][1], 1.0);
    }
    auto edge_id = [&](int a, int b) {
        const std::array<int, 2> key{a, b};
        auto it = std::lower_bound(m.edges.begin(), m.edges.end(), key);
        return static_cast<int>(it - m.edges.begin());
    };
    t1.reserve(3 * m.nf());
    for (int f = 0; f < m.nf(); ++f) {
        const auto [a, b, c] = m.faces[f];
        t1.emplace_back(f, edge_id(a, b), 1.0);
        t1.emplace_back(f, edge_id(b, c), 1.0);
        t1.emplace_back(f, edge_id(a, c), -1.0);
    }
    t2.reserve(4 * m.nt());
    for (int c = 0; c < m.nt(); ++c)
        for (int i = 0; i < 4; ++i) t2.emplace_back(c, m.tet_faces[c][i], m.tet_face_sign[c][i]);
    I.d0.resize(m.ne(), m.nv());
    I.d1.resize(m.nf(), m.ne());
    I.d2.resize(m.nt(), m.nf());
    I.d0.setFromTriplets(t0.begin(), t0.end());
    I.d1.setFromTriplets(t1.begin(), t1.end());
    I.d2.setFromTriplets(t2.begin(), t2.end());
    return I;
}

// ============================================================================
// Assembly
// ============================================================================

WeightedOperators assemble_weighted(const ReferenceMesh& mesh, const DomainMotion& motion, double t,
                                    AssemblyOptions opts) {
    if (!mesh.has_topology()) throw InvalidMesh("topology not built");
    WeightedOperators ops;
    ops.mesh = &mesh;
    ops.motion = &motion;
    ops.time = t;
    {
        const PointGeometry g = geometry_at_ref(motion, to_vec(motion.sample_point()), t);
        ops.J = g.J;
        ops.dJ_ds = g.dJ_ds;
    }
    Incidence inc = build_incidence(mesh);
    ops.d0 = std::move(inc.d0);
    ops.d1 = std::move(inc.d1);
    ops.d2 = std::move(inc.d2);

    const int T = mesh.nt();
    const auto& Q = tet_quadrature();
    Triplets m0, m1, m2, dm0, dm1, dm2, mv, kv;
    m0.reserve(16 * T);
    m1.reserve(36 * T);
    m2.reserve(16 * T);
    if (opts.rates) {
        dm0.reserve(16 * T);
        dm1.reserve(36 * T);
        dm2.reserve(16 * T);
    }
    if (opts.nodal) {
        mv.reserve(144 * T);
        kv.reserve(144 * T);
    }
    ops.M3.resize(T);
    ops.vol.resize(T);
    if (opts.rates) ops.dM3.resize(T);

    for (int c = 0; c < T; ++c) {
        const TetBasis B(mesh, c);
        const auto& tv = mesh.tets[c];
        const auto& te = mesh.tet_edges[c];
        const auto& tf = mesh.tet_faces[c];
        Eigen::Matrix<double, 6, 6> L1 = Eigen::Matrix<double, 6, 6>::Zero(), dL1 = L1;
        Eigen::Matrix4d L2 = Eigen::Matrix4d::Zero(), dL2 = L2, L0 = L2, dL0 = L2;
        Eigen::Matrix<double, 12, 12> LM = Eigen::Matrix<double, 12, 12>::Zero(), LK = LM;
        double jsum = 0.0, djsum = 0.0;
        for (int q = 0; q < 4; ++q) {
            const Eigen::Vector4d& l = Q.bary[q];
            const double w = Q.weight[q] * B.volume;
            const Vec3 y = point_in(mesh, c, l);
            Mat3 gup, glow, dgup, dglow;
            double J = 1.0, dJ = 0.0;
            if (opts.rates) {
                const PointGeometry g = geometry_at_ref(motion, y, t);
                J = g.J;
                dJ = g.dJ_ds;
                gup = g.Ainv * g.Ainv.transpose();
                glow = g.A.transpose() * g.A;
                dgup = dg_upper(g.Ainv, gup, g.dA_ds);
                dglow = g.dA_ds.transpose() * g.A + g.A.transpose() * g.dA_ds;
            } else {
                const PointFrame f = frame_at_ref(motion, y, t);
                J = f.J;
                gup = f.Ainv * f.Ainv.transpose();
                glow = f.A.transpose() * f.A;
            }
            jsum += Q.weight[q] * J;
            djsum += Q.weight[q] * dJ;
            const auto W = B.edge_values(l);
            const auto F = B.face_values(l);
            L1 += (w * J) * W * gup * W.transpose();
            L2 += (w * J) * F * glow * F.transpose();
            L0 += (w * J) * l * l.transpose();
            if (opts.rates) {
                dL1 += w * W * (dJ * gup + J * dgup) * W.transpose();
                dL2 += w * F * (dJ * glow + J * dglow) * F.transpose();
                dL0 += (w * dJ) * l * l.transpose();
            }
            if (opts.nodal) {
                const MetricSample ms = metric_at_ref(motion, y, t);
                for (int a = 0; a < 4; ++a)
                    for (int b = 0; b < 4; ++b)
                        LM.block<3, 3>(3 * a, 3 * b) += (w * ms.J * l[a] * l[b]) * ms.g_lower;
                // Bq maps the 12 local coefficients to (nabla_k u^i) stored at 3 i + k
                Eigen::Matrix<double, 9, 12> Bq = Eigen::Matrix<double, 9, 12>::Zero();
                for (int a = 0; a < 4; ++a)
                    for (int i = 0; i < 3; ++i)
                        for (int k = 0; k < 3; ++k) {
                            Bq(3 * i + k, 3 * a + i) += B.grad(a, k);
                            for (int j = 0; j < 3; ++j)
                                Bq(3 * i + k, 3 * a + j) += l[a] * ms.christoffel[i](k, j);
                        }
                Eigen::Matrix<double, 9, 9> Wt;
                for (int i = 0; i < 3; ++i)
                    for (int k = 0; k < 3; ++k)
                        for (int j = 0; j < 3; ++j)
                            for (int ll = 0; ll < 3; ++ll)
                                Wt(3 * i + k, 3 * j + ll) = ms.g_lower(i, j) * ms.g_upper(k, ll);
                LK += (w * ms.J) * Bq.transpose() * Wt * Bq;
            }
        }
        // exact symmetry of the assembled matrices
        L1 = 0.5 * (L1 + L1.transpose()).eval();
        L2 = 0.5 * (L2 + L2.transpose()).eval();
        L0 = 0.5 * (L0 + L0.transpose()).eval();
        if (opts.rates) {
            dL1 = 0.5 * (dL1 + dL1.transpose()).eval();
            dL2 = 0.5 * (dL2 + dL2.transpose()).eval();
        }
        if (opts.nodal) {
            LM = 0.5 * (LM + LM.transpose()).eval();
            LK = 0.5 * (LK + LK.transpose()).eval();
        }
        for (int a = 0; a < 6; ++a)
            for (int b = 0; b < 6; ++b) {
                m1.emplace_back(te[a], te[b], L1(a, b));
                if (opts.rates) dm1.emplace_back(te[a], te[b], dL1(a, b));
            }
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                m2.emplace_back(tf[a], tf[b], L2(a, b));
                m0.emplace_back(tv[a], tv[b], L0(a, b));
                if (opts.rates) {
                    dm2.emplace_back(tf[a], tf[b], dL2(a, b));
                    dm0.emplace_back(tv[a], tv[b], dL0(a, b));
                }
            }
        if (opts.nodal)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b)
                    for (int i = 0; i < 3; ++i)
                        for (int j = 0; j < 3; ++j) {
                            mv.emplace_back(3 * tv[a] + i, 3 * tv[b] + j, LM(3 * a + i, 3 * b + j));
                            kv.emplace_back(3 * tv[a] + i, 3 * tv[b] + j, LK(3 * a + i, 3 * b + j));
                        }
        ops.vol[c] = B.volume;
        ops.M3[c] = jsum * B.volume;
        if (opts.rates) ops.dM3[c] = djsum * B.volume;
    }

    auto build = [](SpMat& M, int n, Triplets& tr) {
        M.resize(n, n);
        M.setFromTriplets(tr.begin(), tr.end());
        Triplets().swap(tr);
    };
    build(ops.M0, mesh.nv(), m0);
    build(ops.M1, mesh.ne(), m1);
    build(ops.M2, mesh.nf(), m2);
    ops.K0 = SpMat(ops.d0.transpose() * ops.M1 * ops.d0);
    ops.lap_Lt = ops.K0 / ops.J;
    if (opts.rates) {
        build(ops.dM0, mesh.nv(), dm0);
        build(ops.dM1, mesh.ne(), dm1);
        build(ops.dM2, mesh.nf(), dm2);
        ops.dK0 = SpMat(ops.d0.transpose() * ops.dM1 * ops.d0);
        ops.has_rates = true;
    }
    if (opts.nodal) {
        build(ops.mass_t, 3 * mesh.nv(), mv);
        build(ops.stiffness_t, 3 * mesh.nv(), kv);
    }
    return ops;
}

// ============================================================================
// Interpolation
// ============================================================================

VectorXd interpolate_nodal_scalar(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                  const ScalarFn& f) {
    VectorXd u(m.nv());
    for (int i = 0; i < m.nv(); ++i) u[i] = f(to_vec(motion.phi_inv(to_v3(m.vertices[i]), t)));
    return u;
}

VectorXd interpolate_nodal_vector(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                  const VectorFn& u) {
    VectorXd r(3 * m.nv());
    for (int i = 0; i < m.nv(); ++i) {
        const PointFrame f = frame_at_ref(motion, m.vertices[i], t);
        r.segment<3>(3 * i) = f.Ainv * u(f.x);
    }
    return r;
}

VectorXd interpolate_edge(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorFn& u) {
    static const double gs[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    VectorXd r(m.ne());
    for (int e = 0; e < m.ne(); ++e) {
        const Vec3 a = m.vertices[m.edges[e][0]], b = m.vertices[m.edges[e][1]];
        double s = 0.0;
        for (int q = 0; q < 3; ++q) {
            const PointFrame f = frame_at_ref(motion, a + gs[q] * (b - a), t);
            s += gw[q] * (f.A.transpose() * u(f.x)).dot(b - a);
        }
        r[e] = s;
    }
    return r;
}

VectorXd interpolate_face(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorFn& u) {
    const TriRule& R = tri7();
    VectorXd r(m.nf());
    for (int f = 0; f < m.nf(); ++f) {
        const auto& v = m.faces[f];
        const Vec3 n = m.face_area_vector(f);
        double s = 0.0;
        for (size_t q = 0; q < R.weight.size(); ++q) {
            const Vec3 y = R.bary[q][0] * m.vertices[v[0]] + R.bary[q][1] * m.vertices[v[1]] +
                           R.bary[q][2] * m.vertices[v[2]];
            const PointFrame fr = frame_at_ref(motion, y, t);
            s += R.weight[q] * (fr.Ainv * u(fr.x)).dot(n);
        }
        r[f] = s;
    }
    return r;
}

VectorXd interpolate_cell(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const ScalarFn& f) {
    const auto& Q = tet_quadrature();
    VectorXd r(m.nt());
    for (int c = 0; c < m.nt(); ++c) {
        double s = 0.0;
        for (int q = 0; q < 4; ++q)
            s += Q.weight[q] * f(to_vec(motion.phi_inv(to_v3(point_in(m, c, Q.bary[q])), t)));
        r[c] = s;
    }
    return r;
}

// ============================================================================
// Evaluation and recovery
// ============================================================================

Vec3 eval_face_field(const ReferenceMesh& m, const VectorXd& dofs, int t, const Eigen::Vector4d& l) {
    const TetBasis B(m, t);
    const auto F = B.face_values(l);
    Vec3 u = Vec3::Zero();
    for (int i = 0; i < 4; ++i) u += dofs[m.tet_faces[t][i]] * F.row(i).transpose();
    return u;
}

Vec3 eval_edge_field(const ReferenceMesh& m, const VectorXd& dofs, int t, const Eigen::Vector4d& l) {
    const TetBasis B(m, t);
    const auto W = B.edge_values(l);
    Vec3 u = Vec3::Zero();
    for (int e = 0; e < 6; ++e) u += dofs[m.tet_edges[t][e]] * W.row(e).transpose();
    return u;
}

std::vector<Vec3> face_field_cells(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                   const VectorXd& dofs) {
    const Eigen::Vector4d c = Eigen::Vector4d::Constant(0.25);
    std::vector<Vec3> out(m.nt());
    for (int k = 0; k < m.nt(); ++k) {
        const PointFrame f = frame_at_ref(motion, m.tet_centroid(k), t);
        out[k] = f.A * eval_face_field(m, dofs, k, c);
    }
    return out;
}

std::vector<Vec3> edge_field_cells(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                   const VectorXd& dofs) {
    const Eigen::Vector4d c = Eigen::Vector4d::Constant(0.25);
    std::vector<Vec3> out(m.nt());
    for (int k = 0; k < m.nt(); ++k) {
        const PointFrame f = frame_at_ref(motion, m.tet_centroid(k), t);
        out[k] = f.Ainv.transpose() * eval_edge_field(m, dofs, k, c);
    }
    return out;
}

VectorXd cells_to_nodes(const ReferenceMesh& m, const std::vector<Vec3>& cell_values) {
    VectorXd r = VectorXd::Zero(3 * m.nv());
    VectorXd w = VectorXd::Zero(m.nv());
    for (int c = 0; c < m.nt(); ++c)
        for (int v : m.tets[c]) {
            r.segment<3>(3 * v) += m.tet_volume[c] * cell_values[c];
            w[v] += m.tet_volume[c];
        }
    for (int v = 0; v < m.nv(); ++v)
        if (w[v] > 0) r.segment<3>(3 * v) /= w[v];
    return r;
}

VectorXd cells_to_nodes(const ReferenceMesh& m, const VectorXd& cell_values) {
    VectorXd r = VectorXd::Zero(m.nv());
    VectorXd w = VectorXd::Zero(m.nv());
    for (int c = 0; c < m.nt(); ++c)
        for (int v : m.tets[c]) {
            r[v] += m.tet_volume[c] * cell_values[c];
            w[v] += m.tet_volume[c];
        }
    for (int v = 0; v < m.nv(); ++v)
        if (w[v] > 0) r[v] /= w[v];
    return r;
}

std::vector<Vec3> p1_gradients(const ReferenceMesh& m, const VectorXd& u) {
    std::vector<Vec3> g(m.nt());
    for (int c = 0; c < m.nt(); ++c) {
        const auto G = m.bary_gradients(c);
        Vec3 s = Vec3::Zero();
        for (int i = 0; i < 4; ++i) s += u[m.tets[c][i]] * G.row(i).transpose();
        g[c] = s;
    }
    return g;
}

double divergence_preservation_defect(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                      const VectorXd& u_physical) {
    if (u_physical.size() != 3 * m.nv()) throw BadParameters("expected 3 values per vertex");
    std::vector<Vec3> x(m.nv());
    VectorXd ut(3 * m.nv());
    for (int a = 0; a < m.nv(); ++a) {
        x[a] = to_vec(motion.phi_inv(to_v3(m.vertices[a]), t));
        ut.segment<3>(3 * a) = pushforward(motion, u_physical.segment<3>(3 * a), x[a], t);
    }
    double worst = 0.0;
    for (int c = 0; c < m.nt(); ++c) {
        const auto G = m.bary_gradients(c);
        // physical barycentric gradients from the mapped vertices
        Mat3 E;
        for (int i = 0; i < 3; ++i) E.col(i) = x[m.tets[c][i + 1]] - x[m.tets[c][0]];
        const Mat3 Einv = E.inverse();
        double div_x = 0.0, div_y = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int a = m.tets[c][i];
            const Vec3 gx = i == 0 ? Vec3(-Einv.colwise().sum().transpose()) : Vec3(Einv.row(i - 1).transpose());
            div_x += gx.dot(u_physical.segment<3>(3 * a));
            div_y += G.row(i).dot(ut.segment<3>(3 * a));
        }
        worst = std::max(worst, std::abs(div_x - div_y));
    }
    return worst;
}

VectorXd recover_gradient(const ReferenceMesh& m, const DomainMotion& motion, double t,
                          const VectorXd& u) {
    const std::vector<Vec3> g = p1_gradients(m, u);
    std::vector<std::vector<int>> patch(m.nv());
    for (int c = 0; c < m.nt(); ++c)
        for (int v : m.tets[c]) patch[v].push_back(c);
    std::vector<Vec3> cen(m.nt());
    for (int c = 0; c < m.nt(); ++c) cen[c] = m.tet_centroid(c);

    // Interior vertices: linear fit over the one-ring. Boundary vertices see a
    // one-sided patch, so they get a quadratic fit over the two-ring.
    VectorXd r(3 * m.nv());
    std::vector<int> cells;
    for (int v = 0; v < m.nv(); ++v) {
        const bool boundary = m.vertex_label[v] >= 0;
        cells = patch[v];
        if (boundary || cells.size() < 8) {
            for (int c : patch[v])
                for (int w : m.tets[c])
                    if (w != v) cells.insert(cells.end(), patch[w].begin(), patch[w].end());
            std::sort(cells.begin(), cells.end());
            cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        }
        const int nb = boundary ? 10 : 4;
        const Vec3 y0 = m.vertices[v];
        double h = 0.0;
        for (int c : cells) h = std::max(h, (cen[c] - y0).norm());
        Eigen::MatrixXd N = Eigen::MatrixXd::Zero(nb, nb);
        Eigen::MatrixXd R = Eigen::MatrixXd::Zero(nb, 3);
        Eigen::VectorXd p(nb);
        for (int c : cells) {
            const Vec3 d = (cen[c] - y0) / h;
            p.head<4>() << 1.0, d[0], d[1], d[2];
            if (boundary) p.tail<6>() << d[0] * d[0], d[1] * d[1], d[2] * d[2], d[0] * d[1], d[0] * d[2], d[1] * d[2];
            const double w = m.tet_volume[c];
            N += w * p * p.transpose();
            R += w * p * g[c].transpose();
        }
        const Eigen::MatrixXd C = N.ldlt().solve(R);
        const PointFrame f = frame_at_ref(motion, y0, t);
        r.segment<3>(3 * v) = f.Ainv.transpose() * C.row(0).transpose();
    }
    return r;
}

// ============================================================================
// Fluxes and norms
// ============================================================================

double surface_flux(const FEField& field, int label, bool surface_is_cut, const ReferenceMesh& m,
                    const WeightedOperators& ops) {
    if (!field.matches(m)) throw BadParameters("field size does not match the mesh");
    if (field.kind != FieldKind::Face && field.kind != FieldKind::NodalVector)
        throw BadParameters("surface_flux needs a face or nodal vector field");
    bool found = false;
    double s = 0.0;
    for (int f = 0; f < m.nf(); ++f) {
        int sign = 0;
        if (surface_is_cut) {
            if (m.face_cut_label[f] == label) sign = m.face_cut_sign[f];
        } else if (m.face_boundary_label[f] == label) {
            const int c = m.face_cells[f][0];
            for (int i = 0; i < 4; ++i)
                if (m.tet_faces[c][i] == f) sign = m.tet_face_sign[c][i];
        }
        if (sign == 0) continue;
        found = true;
        if (field.kind == FieldKind::Face) {
            s += sign * field.values[f];
        } else {
            const auto& v = m.faces[f];
            const Vec3 u = (field.values.segment<3>(3 * v[0]) + field.values.segment<3>(3 * v[1]) +
                            field.values.segment<3>(3 * v[2])) /
                           3.0;
            s += sign * u.dot(m.face_area_vector(f));
        }
    }
    if (!found)
        throw UnknownLabel((surface_is_cut ? "cut label " : "boundary label ") + std::to_string(label));
    return ops.J * s;
}

namespace {

// Physical gradient norms of a nodal physical vector field with nc components.
void nodal_derivative_norms(const ReferenceMesh& m, const DomainMotion& motion, double t,
                            const VectorXd& U, int nc, double& h1, double& h2) {
    h1 = 0.0;
    h2 = 0.0;
    std::vector<std::vector<Vec3>> grads(nc);
    std::vector<Mat3> Ainv(m.nt());
    std::vector<double> J(m.nt());
    for (int c = 0; c < m.nt(); ++c) {
        const PointFrame f = frame_at_ref(motion, m.tet_centroid(c), t);
        Ainv[c] = f.Ainv;
        J[c] = f.J;
    }
    for (int k = 0; k < nc; ++k) {
        VectorXd comp(m.nv());
        for (int v = 0; v < m.nv(); ++v) comp[v] = U[nc * v + k];
        std::vector<Vec3> g = p1_gradients(m, comp);
        for (int c = 0; c < m.nt(); ++c) {
            g[c] = Ainv[c].transpose() * g[c];
            h1 += J[c] * m.tet_volume[c] * g[c].squaredNorm();
        }
        grads[k] = std::move(g);
    }
    for (int k = 0; k < nc; ++k) {
        const VectorXd G = cells_to_nodes(m, grads[k]);
        for (int d = 0; d < 3; ++d) {
            VectorXd comp(m.nv());
            for (int v = 0; v < m.nv(); ++v) comp[v] = G[3 * v + d];
            const std::vector<Vec3> g2 = p1_gradients(m, comp);
            for (int c = 0; c < m.nt(); ++c)
                h2 += J[c] * m.tet_volume[c] * (Ainv[c].transpose() * g2[c]).squaredNorm();
        }
    }
}

}  // namespace

Norms norms(const FEField& field, const ReferenceMesh& m, const WeightedOperators& ops) {
    if (!field.matches(m)) throw BadParameters("field size does not match the mesh");
    if (ops.motion == nullptr) throw BadParameters("operators carry no motion");
    Norms n;
    if (field.values.size() == 0 || field.values.cwiseAbs().maxCoeff() == 0.0) return n;
    const DomainMotion& motion = *ops.motion;
    const double t = ops.time;
    const VectorXd& x = field.values;
    double l2 = 0.0, h1 = 0.0, h2 = 0.0, d1 = 0.0;
    switch (field.kind) {
        case FieldKind::NodalScalar:
            l2 = x.dot(ops.M0 * x);
            h1 = x.dot(ops.K0 * x);
            nodal_derivative_norms(m, motion, t, x, 1, d1, h2);
            break;
        case FieldKind::NodalVector: {
            if (ops.mass_t.rows() == 0) throw BadParameters("nodal operators were not assembled");
            l2 = x.dot(ops.mass_t * x);
            h1 = x.dot(ops.stiffness_t * x);
            VectorXd u(x.size());
            for (int v = 0; v < m.nv(); ++v)
                u.segment<3>(3 * v) = frame_at_ref(motion, m.vertices[v], t).A * x.segment<3>(3 * v);
            nodal_derivative_norms(m, motion, t, u, 3, d1, h2);
            break;
        }
        case FieldKind::Edge:
            l2 = x.dot(ops.M1 * x);
            nodal_derivative_norms(m, motion, t, cells_to_nodes(m, edge_field_cells(m, motion, t, x)), 3,
                                   h1, h2);
            break;
        case FieldKind::Face:
            l2 = x.dot(ops.M2 * x);
            nodal_derivative_norms(m, motion, t, cells_to_nodes(m, face_field_cells(m, motion, t, x)), 3,
                                   h1, h2);
            break;
        case FieldKind::Cell:
            l2 = x.dot(ops.M3.cwiseProduct(x));
            break;
    }
    n.L2_t = std::sqrt(l2);
    n.H1_t = std::sqrt(l2 + h1);
    n.H2_broken = std::sqrt(l2 + h1 + h2);
    return n;
}

double min_eigenvalue(const SpMat& A, int iterations) {
    VectorXd x = VectorXd::Ones(A.rows()).normalized();
    CGOptions o;
    o.rel_tol = 1e-10;
    o.context = "min_eigenvalue";
    for (int k = 0; k < iterations; ++k) {
        VectorXd y = VectorXd::Zero(A.rows());
        pcg(A, x, y, o);
        x = y / y.norm();
    }
    return x.dot(A * x);
}

std::pair<double, double> metric_weight_bounds(const ReferenceMesh& m, const DomainMotion& motion,
                                               double t) {
    const auto& Q = tet_quadrature();
    double lo = 1e300, hi = 0.0;
    for (int c = 0; c < m.nt(); ++c)
        for (int q = 0; q < 4; ++q) {
            const PointFrame f = frame_at_ref(motion, point_in(m, c, Q.bary[q]), t);
            Eigen::SelfAdjointEigenSolver<Mat3> es(f.A.transpose() * f.A);
            lo = std::min(lo, f.J * es.eigenvalues()[0]);
            hi = std::max(hi, f.J * es.eigenvalues()[2]);
        }
    return {lo, hi};
}

GaussRule gauss_legendre(int n) {
    GaussRule g;
    g.x.resize(n);
    g.w.resize(n);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        g.x[i] = x;
        g.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return g;
}

}  // namespace mdhw
