#include "mdhw/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "mdhw/errors.hpp"

namespace mdhw {

namespace {

int local_face(const ReferenceMesh& m, int c, int f) {
    for (int i = 0; i < 4; ++i)
        if (m.tet_faces[c][i] == f) return i;
    return -1;
}

int outward_sign(const ReferenceMesh& m, int c, int f) { return m.tet_face_sign[c][local_face(m, c, f)]; }

CGOptions cg_opts(const HarmonicOptions& o, const std::string& ctx) {
    CGOptions c;
    c.rel_tol = o.rel_tol;
    c.context = ctx;
    return c;
}

// Divergence-free unit flux tube from Gamma_k to Gamma_0 along a shortest
// path of cells. Reference outward flux is -1 through Gamma_k and +1 through Gamma_0.
VectorXd flux_tube(const ReferenceMesh& m, int k) {
    std::vector<int> prev(m.nt(), -2), via(m.nt(), -1);
    std::deque<int> queue;
    int start_face = -1;
    for (int f : m.boundary_faces)
        if (m.face_boundary_label[f] == k) {
            start_face = f;
            break;
        }
    if (start_face < 0) throw UnknownLabel("boundary label " + std::to_string(k));
    const int c0 = m.face_cells[start_face][0];
    prev[c0] = -1;
    queue.push_back(c0);
    int end_cell = -1, end_face = -1;
    while (!queue.empty() && end_cell < 0) {
        const int c = queue.front();
        queue.pop_front();
        for (int i = 0; i < 4; ++i) {
            const int f = m.tet_faces[c][i];
            if (m.face_boundary_label[f] == 0) {
                end_cell = c;
                end_face = f;
                break;
            }
            if (m.face_cells[f][1] < 0) continue;
            const int n = m.face_cells[f][0] == c ? m.face_cells[f][1] : m.face_cells[f][0];
            if (prev[n] != -2) continue;
            prev[n] = c;
            via[n] = f;
            queue.push_back(n);
        }
    }
    if (end_cell < 0) throw InvalidMesh("no cell path between boundary components");
    VectorXd s = VectorXd::Zero(m.nf());
    s[start_face] = -outward_sign(m, c0, start_face);
    s[end_face] = outward_sign(m, end_cell, end_face);
    for (int c = end_cell; prev[c] >= 0; c = prev[c]) s[via[c]] = outward_sign(m, prev[c], via[c]);
    return s;
}

}  // namespace

VectorXd curl_preimage(const WeightedOperators& ops, const VectorXd& b, const CGOptions& opts) {
    const SpMat A = ops.d1.transpose() * ops.M2 * ops.d1;
    const VectorXd rhs = ops.J * (ops.d1.transpose() * (ops.M2 * b));
    VectorXd w = VectorXd::Zero(ops.ne());
    pcg(A, rhs, w, opts);
    return w;
}

VectorXd remove_gradient_part(const WeightedOperators& ops, const VectorXd& omega, const CGOptions& opts) {
    const VectorXd rhs = ops.d0.transpose() * (ops.M1 * omega);
    VectorXd phi = VectorXd::Zero(ops.nv());
    pcg(ops.K0, rhs, phi, opts);
    return omega - ops.d0 * phi;
}

VectorXd boundary_fluxes(const VectorXd& face_dofs, const ReferenceMesh& m, const WeightedOperators& ops) {
    const int K = m.num_inner_boundaries();
    VectorXd flux = VectorXd::Zero(K);
    for (int f : m.boundary_faces) {
        const int l = m.face_boundary_label[f];
        if (l >= 1) flux[l - 1] += outward_sign(m, m.face_cells[f][0], f) * face_dofs[f];
    }
    return ops.J * flux;
}

HarmonicBasis solve_harmonic_potentials(const ReferenceMesh& m, const WeightedOperators& ops,
                                        const HarmonicOptions& opts) {
    HarmonicBasis basis;
    basis.time = ops.time;
    const int K = m.num_inner_boundaries();
    if (K <= 0) return basis;

    std::vector<bool> fixed(m.nv());
    for (int v = 0; v < m.nv(); ++v) fixed[v] = m.vertex_label[v] >= 0;
    const VectorXd zero = VectorXd::Zero(m.nv());
    for (int k = 1; k <= K; ++k) {
        VectorXd q = VectorXd::Zero(m.nv());
        for (int v = 0; v < m.nv(); ++v)
            if (m.vertex_label[v] == k) q[v] = 1.0;
        const CGResult r = pcg_dirichlet(ops.K0, zero, q, fixed, cg_opts(opts, "harmonic potential"));
        basis.q_residuals.push_back(r.rel_residual);
        basis.q.push_back({FieldKind::NodalScalar, q});

        VectorXd g = recover_gradient(m, *ops.motion, ops.time, q);
        for (int v = 0; v < m.nv(); ++v)
            g.segment<3>(3 * v) = frame_at_ref(*ops.motion, m.vertices[v], ops.time).Ainv * g.segment<3>(3 * v);
        basis.grad_q_nodal.push_back({FieldKind::NodalVector, g});
    }

    // harmonic 2-forms: flux tubes minus their M2 projection on curls
    std::vector<VectorXd> s(K);
    for (int k = 1; k <= K; ++k) {
        const VectorXd s0 = flux_tube(m, k);
        const VectorXd w = curl_preimage(ops, s0, cg_opts(opts, "harmonic 2-form"));
        s[k - 1] = s0 - (ops.d1 * w) / ops.J;
    }
    Eigen::MatrixXd G(K, K), F(K, K);
    for (int j = 0; j < K; ++j) {
        const VectorXd Ms = ops.M2 * s[j];
        for (int i = 0; i < K; ++i) G(i, j) = s[i].dot(Ms);
        F.col(j) = boundary_fluxes(s[j], m, ops);
    }
    // r_l = sum_k C_lk s_k with C G = F
    const Eigen::MatrixXd C = G.ldlt().solve(F.transpose()).transpose();
    for (int l = 0; l < K; ++l) {
        VectorXd r = VectorXd::Zero(m.nf());
        for (int k = 0; k < K; ++k) r += C(l, k) * s[k];
        basis.grad_q.push_back({FieldKind::Face, r});
    }
    return basis;
}

HarmonicBasis solve_harmonic_potentials(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                        const HarmonicOptions& opts) {
    const WeightedOperators ops = assemble_weighted(m, motion, t);
    return solve_harmonic_potentials(m, ops, opts);
}

HarmonicBasis gram_schmidt_vhar(HarmonicBasis basis, const WeightedOperators& ops) {
    const int K = basis.K();
    basis.alpha = Eigen::MatrixXd::Zero(K, K);
    basis.eta.clear();
    std::vector<VectorXd> Meta;
    for (int j = 0; j < K; ++j) {
        const VectorXd& r = basis.grad_q[j].values;
        const VectorXd Mr = ops.M2 * r;
        const double rnorm = std::sqrt(r.dot(Mr));
        VectorXd v = r;
        VectorXd a = VectorXd::Zero(K);
        a[j] = 1.0;
        for (int k = 0; k < j; ++k) {
            const double c = Meta[k].dot(r);
            v -= c * basis.eta[k].values;
            a -= c * basis.alpha.row(k).transpose();
        }
        if (K > 3) {
            for (int k = 0; k < j; ++k) {
                const double c = Meta[k].dot(v);
                v -= c * basis.eta[k].values;
                a -= c * basis.alpha.row(k).transpose();
            }
        }
        const double nrm = std::sqrt(v.dot(ops.M2 * v));
        if (!(nrm >= 1e-12 * rnorm) || rnorm == 0.0)
            throw DependentBasis("Gram-Schmidt denominator " + std::to_string(nrm) + " for k = " +
                                 std::to_string(j + 1));
        basis.alpha.row(j) = a.transpose() / nrm;
        basis.eta.push_back({FieldKind::Face, v / nrm});
        Meta.push_back(ops.M2 * basis.eta.back().values);
    }
    return basis;
}

VharProjection project_onto_vhar(const FEField& b, const HarmonicBasis& basis, const WeightedOperators& ops) {
    if (b.kind != FieldKind::Face) throw BadParameters("project_onto_vhar needs a face field");
    if (static_cast<int>(basis.eta.size()) != basis.K()) throw BadParameters("basis is not orthonormalized");
    VharProjection out;
    out.coeffs = VectorXd::Zero(basis.K());
    out.h = {FieldKind::Face, VectorXd::Zero(b.values.size())};
    const VectorXd Mb = ops.M2 * b.values;
    for (int k = 0; k < basis.K(); ++k) {
        out.coeffs[k] = basis.eta[k].values.dot(Mb);
        out.h.values += out.coeffs[k] * basis.eta[k].values;
    }
    return out;
}

VectorXd vhar_flux_coefficients(const FEField& b, const HarmonicBasis& basis, const ReferenceMesh& m,
                                const WeightedOperators& ops) {
    if (b.kind != FieldKind::Face) throw BadParameters("vhar_flux_coefficients needs a face field");
    return basis.alpha * boundary_fluxes(b.values, m, ops);
}

// ---- cut potentials ----

namespace {

// Bit masks of back-side vertex copies for cut label l.
std::vector<unsigned char> classify_sides(const ReferenceMesh& m, int label) {
    std::vector<unsigned char> mask(m.nt(), 0);
    std::vector<char> on_cut(m.nv(), 0);
    for (int f = 0; f < m.nf(); ++f)
        if (m.face_cut_label[f] == label)
            for (int v : m.faces[f]) on_cut[v] = 1;
    std::vector<std::vector<int>> star(m.nv());
    for (int c = 0; c < m.nt(); ++c)
        for (int v : m.tets[c])
            if (on_cut[v]) star[v].push_back(c);

    for (int v = 0; v < m.nv(); ++v) {
        if (!on_cut[v]) continue;
        const auto& S = star[v];
        const int n = static_cast<int>(S.size());
        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        auto index_of = [&](int c) { return static_cast<int>(std::lower_bound(S.begin(), S.end(), c) - S.begin()); };
        std::vector<int> group_side(n, 0);  // +1 front, -1 back, per root
        for (int a = 0; a < n; ++a) {
            const int c = S[a];
            for (int i = 0; i < 4; ++i) {
                if (m.tets[c][i] == v) continue;  // the face opposite v does not contain v
                const int f = m.tet_faces[c][i];
                if (m.face_cut_label[f] == label) {
                    const Vec3 nu = m.face_cut_sign[f] * m.face_area_vector(f);
                    group_side[a] = nu.dot(m.tet_centroid(c) - m.face_centroid(f)) > 0 ? 1 : -1;
                    continue;
                }
                const auto& fc = m.face_cells[f];
                if (fc[1] < 0) continue;
                const int other = fc[0] == c ? fc[1] : fc[0];
                parent[find(a)] = find(index_of(other));
            }
        }
        std::vector<int> root_side(n, 0);
        for (int a = 0; a < n; ++a)
            if (group_side[a] != 0) root_side[find(a)] = group_side[a];
        for (int a = 0; a < n; ++a) {
            if (root_side[find(a)] >= 0) continue;
            const int c = S[a];
            for (int i = 0; i < 4; ++i)
                if (m.tets[c][i] == v) mask[c] |= static_cast<unsigned char>(1u << i);
        }
    }
    return mask;
}

}  // namespace

CutPotentialBasis solve_cut_potentials(const ReferenceMesh& m, const WeightedOperators& ops,
                                       const HarmonicOptions& opts) {
    CutPotentialBasis basis;
    basis.time = ops.time;
    const int L = m.num_cuts();
    if (L <= 0) return basis;

    // one tet per edge to read the local copies from
    std::vector<std::pair<int, int>> edge_tet(m.ne(), {-1, -1});
    for (int c = 0; c < m.nt(); ++c)
        for (int e = 0; e < 6; ++e)
            if (edge_tet[m.tet_edges[c][e]].first < 0) edge_tet[m.tet_edges[c][e]] = {c, e};

    for (int l = 1; l <= L; ++l) {
        const auto mask = classify_sides(m, l);
        VectorXd z(m.ne());
        for (int e = 0; e < m.ne(); ++e) {
            const auto [c, le] = edge_tet[e];
            const auto& ge = m.edges[e];
            int ia = -1, ib = -1;
            for (int i = 0; i < 4; ++i) {
                if (m.tets[c][i] == ge[0]) ia = i;
                if (m.tets[c][i] == ge[1]) ib = i;
            }
            (void)le;
            z[e] = ((mask[c] >> ib) & 1) - ((mask[c] >> ia) & 1);
        }
        const VectorXd rhs = ops.d0.transpose() * (ops.M1 * z);
        VectorXd phi = VectorXd::Zero(m.nv());
        const CGResult r = pcg(ops.K0, rhs, phi, cg_opts(opts, "cut potential"));
        phi.array() -= phi.mean();
        const VectorXd P = z - ops.d0 * phi;
        basis.residuals.push_back(r.rel_residual);
        basis.p.push_back({FieldKind::NodalScalar, -phi});
        basis.grad_p.push_back({FieldKind::Edge, P});
        basis.cocycle.push_back({FieldKind::Edge, z});
        basis.sigma_flux.push_back(P.dot(ops.M1 * P));
        basis.back_side.push_back(mask);
    }
    return basis;
}

CutPotentialBasis solve_cut_potentials(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                       const HarmonicOptions& opts) {
    const WeightedOperators ops = assemble_weighted(m, motion, t);
    return solve_cut_potentials(m, ops, opts);
}

double cut_jump_defect(const CutPotentialBasis& basis, const ReferenceMesh& m) {
    const int L = basis.L();
    double worst = 0.0;
    for (int j = 0; j < L; ++j) {
        // front and back copies of every Sigma_j vertex, for each potential l
        std::vector<int> front(m.nv(), -1), back(m.nv(), -1);
        std::vector<char> on_cut(m.nv(), 0);
        for (int f = 0; f < m.nf(); ++f)
            if (m.face_cut_label[f] == j + 1)
                for (int v : m.faces[f]) on_cut[v] = 1;
        for (int c = 0; c < m.nt(); ++c)
            for (int i = 0; i < 4; ++i) {
                const int v = m.tets[c][i];
                if (!on_cut[v]) continue;
                const int code = c * 4 + i;
                if ((basis.back_side[j][c] >> i) & 1)
                    back[v] = code;
                else
                    front[v] = code;
            }
        for (int l = 0; l < L; ++l) {
            auto value = [&](int v, int code) {
                const int c = code / 4, i = code % 4;
                return basis.p[l].values[v] + ((basis.back_side[l][c] >> i) & 1);
            };
            for (int v = 0; v < m.nv(); ++v) {
                if (!on_cut[v]) continue;
                if (front[v] < 0 || back[v] < 0) {
                    worst = std::max(worst, 1.0);
                    continue;
                }
                const double jump = value(v, back[v]) - value(v, front[v]);
                worst = std::max(worst, std::abs(jump - (l == j ? 1.0 : 0.0)));
            }
        }
    }
    return worst;
}

double sigma_flux(const FEField& w, int label, const CutPotentialBasis& basis, const WeightedOperators& ops) {
    if (w.kind != FieldKind::Edge) throw BadParameters("sigma_flux needs an edge field");
    if (label < 1 || label > basis.L()) throw UnknownLabel("cut label " + std::to_string(label));
    return w.values.dot(ops.M1 * basis.grad_p[label - 1].values);
}

double nodal_vector_l2_error(const ReferenceMesh& m, const DomainMotion& motion, double t,
                             const VectorXd& physical_nodal, const VectorFn& exact) {
    const auto& Q = tet_quadrature();
    double err = 0.0, ref = 0.0;
    for (int c = 0; c < m.nt(); ++c) {
        const auto& tv = m.tets[c];
        for (int k = 0; k < 4; ++k) {
            Vec3 y = Vec3::Zero(), u = Vec3::Zero();
            for (int i = 0; i < 4; ++i) {
                y += Q.bary[k][i] * m.vertices[tv[i]];
                u += Q.bary[k][i] * physical_nodal.segment<3>(3 * tv[i]);
            }
            const PointFrame f = frame_at_ref(motion, y, t);
            const Vec3 e = exact(f.x);
            const double w = Q.weight[k] * m.tet_volume[c] * f.J;
            err += w * (u - e).squaredNorm();
            ref += w * e.squaredNorm();
        }
    }
    return std::sqrt(err / ref);
}

}  // namespace mdhw
