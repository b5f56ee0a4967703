#include "mdhw/decomposition.hpp"

#include <algorithm>
#include <cmath>

#include "mdhw/errors.hpp"
#include "mdhw/rng.hpp"

namespace mdhw {

namespace {

CGOptions make_opts(double tol, const std::string& ctx) {
    CGOptions o;
    o.rel_tol = tol;
    o.context = ctx;
    return o;
}

double m2_dot(const WeightedOperators& ops, const VectorXd& a, const VectorXd& b) { return a.dot(ops.M2 * b); }

}  // namespace

VectorXd weak_gradient(const WeightedOperators& ops, const VectorXd& p, double tol) {
    const VectorXd rhs = -ops.J * (ops.d2.transpose() * p);
    VectorXd g = VectorXd::Zero(ops.nf());
    pcg(ops.M2, rhs, g, make_opts(tol, "weak gradient"));
    return g;
}

VectorXd schur_solve(const WeightedOperators& ops, const VectorXd& rhs, const DecompositionOptions& opts,
                     CGResult* info) {
    const VectorXd M2inv = inverse_diagonal(ops.M2);
    const CGOptions inner = make_opts(opts.inner_tol, "scalar potential (mass solve)");
    VectorXd tmp = VectorXd::Zero(ops.nf());
    // S x = J d2 M2^{-1} d2^T x; the previous inner solution is a good start
    auto S = [&](const VectorXd& x, VectorXd& y) {
        const VectorXd r = ops.d2.transpose() * x;
        pcg([&](const VectorXd& v, VectorXd& out) { out.noalias() = ops.M2 * v; }, r, tmp, M2inv, inner);
        y = ops.J * (ops.d2 * tmp);
    };
    VectorXd diag = VectorXd::Zero(ops.nc());
    for (int k = 0; k < ops.d2.outerSize(); ++k)
        for (SpMat::InnerIterator it(ops.d2, k); it; ++it)
            diag[it.row()] += ops.J * it.value() * it.value() * M2inv[it.col()];
    VectorXd p = VectorXd::Zero(ops.nc());
    const CGResult r = pcg(S, rhs, p, diag.cwiseInverse(), make_opts(opts.rel_tol, "scalar potential"));
    if (info) *info = r;
    return p;
}

ScalarPotential scalar_potential(const FEField& f, const WeightedOperators& ops, const DecompositionOptions& opts) {
    if (f.kind != FieldKind::Face) throw BadParameters("scalar_potential needs a face field");
    ScalarPotential out;
    const VectorXd p = schur_solve(ops, -(ops.d2 * f.values), opts, &out.solve);
    out.p = {FieldKind::Cell, p};
    out.grad_p = {FieldKind::Face, weak_gradient(ops, p, opts.inner_tol)};
    return out;
}

VectorXd cell_to_nodal_dirichlet(const ReferenceMesh& m, const VectorXd& p) {
    std::vector<std::vector<int>> patch(m.nv());
    for (int c = 0; c < m.nt(); ++c)
        for (int v : m.tets[c]) patch[v].push_back(c);
    std::vector<Vec3> centroid(m.nt());
    for (int c = 0; c < m.nt(); ++c) centroid[c] = m.tet_centroid(c);
    VectorXd n = VectorXd::Zero(m.nv());
    for (int v = 0; v < m.nv(); ++v) {
        if (m.vertex_label[v] >= 0) continue;
        std::vector<int> cells = patch[v];
        if (cells.size() < 8) {
            for (int c : patch[v])
                for (int u : m.tets[c]) cells.insert(cells.end(), patch[u].begin(), patch[u].end());
            std::sort(cells.begin(), cells.end());
            cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
        }
        // volume-weighted linear fit of the cell values at the centroids
        Eigen::Matrix4d N = Eigen::Matrix4d::Zero();
        Eigen::Vector4d R = Eigen::Vector4d::Zero();
        for (int c : cells) {
            Eigen::Vector4d phi;
            phi << 1.0, centroid[c] - m.vertices[v];
            N += m.tet_volume[c] * phi * phi.transpose();
            R += m.tet_volume[c] * p[c] * phi;
        }
        n[v] = N.ldlt().solve(R)[0];
    }
    return n;
}

double relative_divergence(const FEField& b, const WeightedOperators& ops) {
    const double scale = b.values.cwiseAbs().maxCoeff();
    if (scale == 0.0) return 0.0;
    return (ops.d2 * b.values).cwiseAbs().maxCoeff() / scale;
}

namespace {

// scale: magnitude the divergence is measured against
SolenoidalParts solenoidal_impl(const FEField& b, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                                const WeightedOperators& ops, const DecompositionOptions& opts, double scale) {
    if (b.kind != FieldKind::Face) throw BadParameters("decompose_solenoidal needs a face field");
    const double div = scale > 0.0 ? (ops.d2 * b.values).cwiseAbs().maxCoeff() / scale : 0.0;
    if (div > opts.div_tol) throw NonSolenoidalInput("relative cell divergence " + std::to_string(div));

    SolenoidalParts out;
    VharProjection hp = project_onto_vhar(b, basis, ops);
    out.h = hp.h;
    out.coeffs_h = hp.coeffs;

    const CGOptions cg = make_opts(opts.rel_tol, "vector potential");
    const SpMat A = ops.d1.transpose() * ops.M2 * ops.d1;
    const VectorXd rhs = ops.J * (ops.d1.transpose() * (ops.M2 * (b.values - hp.h.values)));
    VectorXd w = VectorXd::Zero(ops.ne());
    out.solve = pcg(A, rhs, w, cg);
    w = remove_gradient_part(ops, w, cg);

    // remove the X_har component so that every Sigma-flux vanishes
    const int L = cuts.L();
    if (L > 0) {
        Eigen::MatrixXd G(L, L);
        VectorXd c(L);
        std::vector<VectorXd> MP(L);
        for (int i = 0; i < L; ++i) MP[i] = ops.M1 * cuts.grad_p[i].values;
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) G(i, j) = cuts.grad_p[j].values.dot(MP[i]);
            c[i] = w.dot(MP[i]);
        }
        const VectorXd a = G.ldlt().solve(c);
        for (int i = 0; i < L; ++i) w -= a[i] * cuts.grad_p[i].values;
        out.fluxes_w = VectorXd(L);
        for (int i = 0; i < L; ++i) out.fluxes_w[i] = w.dot(MP[i]);
    } else {
        out.fluxes_w = VectorXd::Zero(0);
    }
    const VectorXd Mw = ops.M1 * w;
    const double nMw = Mw.norm();
    out.div_defect = nMw > 0.0 ? (ops.d0.transpose() * Mw).norm() / nMw : 0.0;
    out.w = {FieldKind::Edge, w};
    out.curl_w = {FieldKind::Face, (ops.d1 * w) / ops.J};
    return out;
}

}  // namespace

SolenoidalParts decompose_solenoidal(const FEField& b, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                                     const WeightedOperators& ops, const DecompositionOptions& opts) {
    return solenoidal_impl(b, basis, cuts, ops, opts, b.values.cwiseAbs().maxCoeff());
}

HWTriple decompose_general(const FEField& f, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                           const WeightedOperators& ops, const DecompositionOptions& opts) {
    if (f.kind != FieldKind::Face) throw BadParameters("decompose_general needs a face field");
    HWTriple out;
    out.time = ops.time;
    ScalarPotential sp = scalar_potential(f, ops, opts);
    FEField b{FieldKind::Face, f.values - sp.grad_p.values};
    SolenoidalParts sol = solenoidal_impl(b, basis, cuts, ops, opts, f.values.cwiseAbs().maxCoeff());
    out.h = sol.h;
    out.w = sol.w;
    out.p = sp.p;
    out.curl_w = sol.curl_w;
    out.grad_p = sp.grad_p;
    out.coeffs_h = sol.coeffs_h;
    out.fluxes_w = sol.fluxes_w;
    out.div_defect = sol.div_defect;

    const double ff = m2_dot(ops, f.values, f.values);
    const VectorXd r = f.values - out.h.values - out.curl_w.values - out.grad_p.values;
    out.residual = ff > 0.0 ? std::sqrt(m2_dot(ops, r, r) / ff) : 0.0;
    if (ff > 0.0) {
        out.orth_h_curl = std::abs(m2_dot(ops, out.h.values, out.curl_w.values)) / ff;
        out.orth_h_grad = std::abs(m2_dot(ops, out.h.values, out.grad_p.values)) / ff;
        out.orth_curl_grad = std::abs(m2_dot(ops, out.curl_w.values, out.grad_p.values)) / ff;
    }
    return out;
}

double c_omega_ratio(const FEField& b, const HarmonicBasis& basis, const CutPotentialBasis& cuts,
                     const ReferenceMesh& m, const WeightedOperators& ops, const DecompositionOptions& opts) {
    const SolenoidalParts s = decompose_solenoidal(b, basis, cuts, ops, opts);
    const double nb = norms(b, m, ops).H1_t;
    if (nb == 0.0) return 0.0;
    return norms(s.w, m, ops).H2_broken / nb;
}

FEField random_solenoidal_probe(const ReferenceMesh& m, const WeightedOperators& ops, std::uint64_t seed, int k) {
    CounterRng rng(seed, 1000 + static_cast<std::uint64_t>(k));
    struct Mode {
        Vec3 wave, amp;
        double phase;
    };
    std::vector<Mode> modes(6);
    for (auto& md : modes) {
        for (int i = 0; i < 3; ++i) md.wave[i] = rng.uniform(-1.5, 1.5);
        for (int i = 0; i < 3; ++i) md.amp[i] = rng.normal();
        md.phase = rng.uniform(0.0, 6.283185307179586);
    }
    auto A = [&](const Vec3& x) {
        Vec3 a = Vec3::Zero();
        for (const auto& md : modes) a += md.amp * std::sin(md.wave.dot(x) + md.phase);
        return a;
    };
    const VectorXd psi = interpolate_edge(m, *ops.motion, ops.time, A);
    FEField b{FieldKind::Face, (ops.d1 * psi) / ops.J};
    const double n = norms(b, m, ops).H1_t;
    if (n > 0.0) b.values /= n;
    return b;
}

double estimate_C_omega(const ReferenceMesh& m, const DomainMotion& motion, double t, int n_probes,
                        std::uint64_t seed, const DecompositionOptions& opts) {
    if (n_probes < 8) throw BadParameters("estimate_C_omega needs at least 8 probes");
    const WeightedOperators ops = assemble_weighted(m, motion, t);
    HarmonicOptions ho;
    ho.rel_tol = opts.rel_tol;
    const HarmonicBasis basis = gram_schmidt_vhar(solve_harmonic_potentials(m, ops, ho), ops);
    const CutPotentialBasis cuts = solve_cut_potentials(m, ops, ho);
    double best = 0.0;
    for (int k = 0; k < n_probes; ++k) {
        const FEField b = random_solenoidal_probe(m, ops, seed, k);
        best = std::max(best, c_omega_ratio(b, basis, cuts, m, ops, opts));
    }
    return best;
}

}  // namespace mdhw
