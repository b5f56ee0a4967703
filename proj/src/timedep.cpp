#include "mdhw/timedep.hpp"

#include <cmath>

#include "mdhw/errors.hpp"

namespace mdhw {

namespace {

CGOptions cg(double tol, const std::string& ctx) {
    CGOptions o;
    o.rel_tol = tol;
    o.context = ctx;
    return o;
}

VectorXd mass_solve(const SpMat& M, const VectorXd& b, double tol, const std::string& ctx) {
    VectorXd x = VectorXd::Zero(b.size());
    if (b.norm() == 0.0) return x;
    pcg(M, b, x, cg(tol, ctx));
    return x;
}

double wnorm(const SpMat& M, const VectorXd& v) { return std::sqrt(std::max(0.0, v.dot(M * v))); }

void require_rates(const WeightedOperators& ops) {
    if (!ops.has_rates) throw BadParameters("operators were assembled without rates");
}

DecompositionOptions decomp_opts(const TimedepOptions& o) {
    DecompositionOptions d;
    d.rel_tol = o.rel_tol;
    d.inner_tol = std::min(1e-13, 0.1 * o.rel_tol);
    return d;
}

// Edge circulations of (G w) with G = g_lower or its rate, 3-point Gauss per edge.
VectorXd metric_circulation(const ReferenceMesh& m, const DomainMotion& motion, double t, const VectorXd& w,
                            bool rate) {
    static const double gs[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
    static const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
    VectorXd c(m.ne());
    for (int e = 0; e < m.ne(); ++e) {
        const int a = m.edges[e][0], b = m.edges[e][1];
        const Vec3 ya = m.vertices[a], yb = m.vertices[b];
        const Vec3 wa = w.segment<3>(3 * a), wb = w.segment<3>(3 * b);
        double s = 0.0;
        for (int q = 0; q < 3; ++q) {
            const Vec3 y = (1 - gs[q]) * ya + gs[q] * yb;
            const MetricSample g = metric_at_ref(motion, y, t);
            const Mat3& G = rate ? g.dg_lower_ds : g.g_lower;
            s += gw[q] * (G * ((1 - gs[q]) * wa + gs[q] * wb)).dot(yb - ya);
        }
        c[e] = s;
    }
    return c;
}

}  // namespace

AnchorFrame make_anchor(const ReferenceMesh& ref, MotionPtr base, double t0) {
    AnchorFrame f;
    f.base = base;
    f.t0 = t0;
    f.motion = std::make_shared<const AnchoredMotion>(base, t0);
    f.mesh = mapped_mesh(ref, [&](const Vec3& y) { return to_vec(base->phi_inv(to_v3(y), t0)); });
    return f;
}

VectorXd ldot_apply(const WeightedOperators& ops, const VectorXd& q) {
    require_rates(ops);
    return (ops.dK0 * q) / ops.J - (ops.dJ_ds / (ops.J * ops.J)) * (ops.K0 * q);
}

FEField solve_qdot(const ReferenceMesh& m, const WeightedOperators& ops, const FEField& q,
                   const TimedepOptions& opts) {
    if (q.kind != FieldKind::NodalScalar) throw BadParameters("solve_qdot needs a nodal scalar");
    const VectorXd rhs = -ops.J * ldot_apply(ops, q.values);
    std::vector<bool> fixed(m.nv());
    for (int v = 0; v < m.nv(); ++v) fixed[v] = m.vertex_label[v] >= 0;
    VectorXd qd = VectorXd::Zero(m.nv());
    if (rhs.norm() > 0.0) pcg_dirichlet(ops.K0, rhs, qd, fixed, cg(opts.rel_tol, "qdot"));
    return {FieldKind::NodalScalar, qd};
}

HarmonicRates harmonic_rates(const HarmonicBasis& basis, const WeightedOperators& ops, const TimedepOptions& opts) {
    require_rates(ops);
    const int K = basis.K();
    HarmonicRates out;
    out.alpha_dot = Eigen::MatrixXd::Zero(K, K);
    if (K == 0) return out;
    const DecompositionOptions dopt = decomp_opts(opts);
    // r_k represents J F_k on ker d2, so rdot = (Jdot/J) r - Pi M2^{-1} M2dot r
    for (int k = 0; k < K; ++k) {
        const VectorXd& r = basis.grad_q[k].values;
        const VectorXd v = mass_solve(ops.M2, ops.dM2 * r, 0.1 * dopt.inner_tol, "harmonic rate (mass)");
        const ScalarPotential sp = scalar_potential({FieldKind::Face, v}, ops, dopt);
        out.grad_q_dot.push_back({FieldKind::Face, (ops.dJ_ds / ops.J) * r - (v - sp.grad_p.values)});
    }
    Eigen::MatrixXd G(K, K), Gd(K, K);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            const VectorXd& ri = basis.grad_q[i].values;
            const VectorXd& rj = basis.grad_q[j].values;
            G(i, j) = ri.dot(ops.M2 * rj);
            Gd(i, j) = out.grad_q_dot[i].values.dot(ops.M2 * rj) + ri.dot(ops.M2 * out.grad_q_dot[j].values) +
                       ri.dot(ops.dM2 * rj);
        }
    // G = L L^T, alpha = L^{-1}; Ldot = L Phi(L^{-1} Gdot L^{-T})
    const Eigen::MatrixXd L = G.llt().matrixL();
    const Eigen::MatrixXd alpha = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(K, K));
    Eigen::MatrixXd X = alpha * Gd * alpha.transpose();
    Eigen::MatrixXd Phi = X.triangularView<Eigen::StrictlyLower>();
    Phi.diagonal() = 0.5 * X.diagonal();
    const Eigen::MatrixXd Ldot = L * Phi;
    out.alpha_dot = -alpha * Ldot * alpha;
    for (int j = 0; j < K; ++j) {
        VectorXd e = VectorXd::Zero(ops.nf());
        for (int k = 0; k <= j; ++k)
            e += out.alpha_dot(j, k) * basis.grad_q[k].values + alpha(j, k) * out.grad_q_dot[k].values;
        out.eta_dot.push_back({FieldKind::Face, e});
    }
    return out;
}

VharRate vhar_projection_rate(const FEField& b, const FEField& b_dot, const HarmonicBasis& basis,
                              const HarmonicRates& rates, const WeightedOperators& ops) {
    VharRate out;
    const int K = basis.K();
    out.coeffs_dot = VectorXd::Zero(K);
    VectorXd hd = VectorXd::Zero(ops.nf());
    for (int k = 0; k < K; ++k) {
        const VectorXd& e = basis.eta[k].values;
        const VectorXd& ed = rates.eta_dot[k].values;
        const double c = b.values.dot(ops.M2 * e);
        const double cd = b_dot.values.dot(ops.M2 * e) + b.values.dot(ops.M2 * ed) + b.values.dot(ops.dM2 * e);
        out.coeffs_dot[k] = cd;
        hd += cd * e + c * ed;
    }
    out.h_dot = {FieldKind::Face, hd};
    return out;
}

FEField solve_pdot(const FEField& p, const FEField& f_dot, const WeightedOperators& ops, const TimedepOptions& opts) {
    require_rates(ops);
    if (p.kind != FieldKind::Cell || f_dot.kind != FieldKind::Face) throw BadParameters("solve_pdot field kinds");
    const DecompositionOptions dopt = decomp_opts(opts);
    // Sdot p = Jdot d2 M2^{-1} d2^T p - J d2 M2^{-1} M2dot M2^{-1} d2^T p
    const VectorXd u = mass_solve(ops.M2, ops.d2.transpose() * p.values, dopt.inner_tol, "pdot (mass)");
    const VectorXd v = mass_solve(ops.M2, ops.dM2 * u, dopt.inner_tol, "pdot (mass)");
    const VectorXd Sdot_p = ops.d2 * (ops.dJ_ds * u - ops.J * v);
    const VectorXd rhs = -(ops.d2 * f_dot.values) - Sdot_p;
    return {FieldKind::Cell, schur_solve(ops, rhs, dopt)};
}

VectorXd weak_gradient_rate(const WeightedOperators& ops, const VectorXd& p, const VectorXd& p_dot, double tol) {
    require_rates(ops);
    const VectorXd u = mass_solve(ops.M2, ops.d2.transpose() * p, tol, "weak gradient rate");
    const VectorXd rhs = -ops.dJ_ds * (ops.d2.transpose() * p) + ops.J * (ops.dM2 * u) -
                         ops.J * (ops.d2.transpose() * p_dot);
    return mass_solve(ops.M2, rhs, tol, "weak gradient rate");
}

std::vector<FEField> cut_potential_rates(const CutPotentialBasis& cuts, const WeightedOperators& ops,
                                         const TimedepOptions& opts) {
    require_rates(ops);
    std::vector<FEField> out;
    for (int l = 0; l < cuts.L(); ++l) {
        const VectorXd rhs = ops.d0.transpose() * (ops.dM1 * cuts.grad_p[l].values);
        VectorXd phi = VectorXd::Zero(ops.nv());
        if (rhs.norm() > 0.0) pcg(ops.K0, rhs, phi, cg(opts.rel_tol, "cut potential rate"));
        out.push_back({FieldKind::Edge, -(ops.d0 * phi)});
    }
    return out;
}

WdotResult solve_wdot(const FEField& w, const FEField& b, const FEField& h, const FEField& b_dot,
                      const FEField& h_dot, const CutPotentialBasis& cuts, const WeightedOperators& ops,
                      const TimedepOptions& opts) {
    require_rates(ops);
    if (w.kind != FieldKind::Edge) throw BadParameters("solve_wdot needs an edge field w");
    const double J = ops.J, Jd = ops.dJ_ds;
    // d1 wdot = Jdot (b - h) + J (bdot - hdot)
    const VectorXd r = Jd * (b.values - h.values) + J * (b_dot.values - h_dot.values);
    VectorXd wd = curl_preimage(ops, r / J, cg(opts.rel_tol, "wdot"));
    // gauge: d0^T (M1dot w + M1 wdot) = 0
    {
        const VectorXd rhs = -(ops.d0.transpose() * (ops.dM1 * w.values + ops.M1 * wd));
        VectorXd phi = VectorXd::Zero(ops.nv());
        if (rhs.norm() > 0.0) pcg(ops.K0, rhs, phi, cg(opts.rel_tol, "wdot gauge"));
        wd += ops.d0 * phi;
    }
    WdotResult out;
    const int L = cuts.L();
    out.flux_rates = VectorXd::Zero(L);
    if (L > 0) {
        const std::vector<FEField> Pd = cut_potential_rates(cuts, ops, opts);
        Eigen::MatrixXd G(L, L);
        VectorXd c(L);
        auto rate_of_flux = [&](const VectorXd& v, int l) {
            const VectorXd& P = cuts.grad_p[l].values;
            return v.dot(ops.M1 * P) + w.values.dot(ops.dM1 * P) + w.values.dot(ops.M1 * Pd[l].values);
        };
        for (int i = 0; i < L; ++i) {
            for (int j = 0; j < L; ++j) G(i, j) = cuts.grad_p[j].values.dot(ops.M1 * cuts.grad_p[i].values);
            c[i] = rate_of_flux(wd, i);
        }
        const VectorXd a = G.ldlt().solve(c);
        for (int i = 0; i < L; ++i) wd -= a[i] * cuts.grad_p[i].values;
        for (int i = 0; i < L; ++i) out.flux_rates[i] = rate_of_flux(wd, i);
    }
    const VectorXd Mw = ops.M1 * w.values;
    const double nMw = Mw.norm();
    out.gauge_rate = nMw > 0.0 ? (ops.d0.transpose() * (ops.dM1 * w.values + ops.M1 * wd)).norm() / nMw : 0.0;
    out.w_dot = {FieldKind::Edge, wd};
    out.curl_w_dot = {FieldKind::Face, (ops.d1 * wd) / J - (Jd / (J * J)) * (ops.d1 * w.values)};
    return out;
}

FEField rot_apply(const ReferenceMesh& m, const DomainMotion& motion, double t, const FEField& w) {
    if (w.kind != FieldKind::NodalVector) throw BadParameters("rot_apply needs a nodal vector field");
    const Incidence inc = build_incidence(m);
    const VectorXd c = metric_circulation(m, motion, t, w.values, false);
    return {FieldKind::Face, (inc.d1 * c) / motion.jacobian(t)};
}

FEField rotdot_apply(const ReferenceMesh& m, const WeightedOperators& ops, const FEField& w) {
    require_rates(ops);
    if (w.kind != FieldKind::NodalVector) throw BadParameters("rotdot_apply needs a nodal vector field");
    const VectorXd c = metric_circulation(m, *ops.motion, ops.time, w.values, false);
    const VectorXd cd = metric_circulation(m, *ops.motion, ops.time, w.values, true);
    return {FieldKind::Face, (ops.d1 * cd) / ops.J - (ops.dJ_ds / (ops.J * ops.J)) * (ops.d1 * c)};
}

VectorXd time_rate(const std::function<VectorXd(double)>& family, double t, double step) {
    return (family(t - 2 * step) - 8.0 * family(t - step) + 8.0 * family(t + step) - family(t + 2 * step)) /
           (12.0 * step);
}

FaceFamily physical_face_family(VectorFn f) {
    return [f = std::move(f)](const ReferenceMesh& m, const DomainMotion& motion, double t) {
        return interpolate_face(m, motion, t, f);
    };
}

DecompositionState decompose_at(const ReferenceMesh& m, const DomainMotion& motion, double t,
                                const FaceFamily& family, bool rates, const TimedepOptions& opts) {
    DecompositionState s;
    s.time = t;
    AssemblyOptions ao;
    ao.rates = rates;
    s.ops = assemble_weighted(m, motion, t, ao);
    HarmonicOptions ho;
    ho.rel_tol = opts.rel_tol;
    s.basis = gram_schmidt_vhar(solve_harmonic_potentials(m, s.ops, ho), s.ops);
    s.cuts = solve_cut_potentials(m, s.ops, ho);
    s.f = {FieldKind::Face, family(m, motion, t)};
    s.triple = decompose_general(s.f, s.basis, s.cuts, s.ops, decomp_opts(opts));
    s.b = {FieldKind::Face, s.f.values - s.triple.grad_p.values};
    return s;
}

DotFields differentiate(const DecompositionState& s, const FaceFamily& family, const TimedepOptions& opts) {
    const WeightedOperators& ops = s.ops;
    require_rates(ops);
    const ReferenceMesh& m = *ops.mesh;
    DotFields d;
    d.t0 = s.time;
    d.f_dot = {FieldKind::Face,
               time_rate([&](double t) { return family(m, *ops.motion, t); }, s.time, opts.data_step)};
    for (const auto& q : s.basis.q) d.q_dot.push_back(solve_qdot(m, ops, q, opts));
    d.p_dot = solve_pdot(s.triple.p, d.f_dot, ops, opts);
    d.p_dot_nodal = {FieldKind::NodalScalar, cell_to_nodal_dirichlet(m, d.p_dot.values)};
    const double tol = std::min(1e-13, 0.1 * opts.rel_tol);
    d.b_dot = {FieldKind::Face,
               d.f_dot.values - weak_gradient_rate(ops, s.triple.p.values, d.p_dot.values, tol)};
    const HarmonicRates hr = harmonic_rates(s.basis, ops, opts);
    d.h_dot = vhar_projection_rate(s.b, d.b_dot, s.basis, hr, ops).h_dot;
    const WdotResult wr = solve_wdot(s.triple.w, s.b, s.triple.h, d.b_dot, d.h_dot, s.cuts, ops, opts);
    d.w_dot = wr.w_dot;
    d.curl_w_dot = wr.curl_w_dot;
    d.flux_rates = wr.flux_rates;
    d.gauge_rate = wr.gauge_rate;
    const double nb = std::max(wnorm(ops.M2, d.b_dot.values), wnorm(ops.M2, s.b.values));
    const VectorXd res = d.b_dot.values - d.h_dot.values - d.curl_w_dot.values;
    d.residual_rate = nb > 0.0 ? wnorm(ops.M2, res) / nb : 0.0;
    return d;
}

std::vector<ConsistencyRow> consistency_table(const AnchorFrame& frame, const FaceFamily& family, double eps,
                                              const TimedepOptions& opts) {
    const ReferenceMesh& m = frame.mesh;
    const DomainMotion& motion = *frame.motion;
    const double t0 = frame.t0;
    const DecompositionState s0 = decompose_at(m, motion, t0, family, true, opts);
    const DotFields d = differentiate(s0, family, opts);
    const DecompositionState s1 = decompose_at(m, motion, t0 + eps, family, false, opts);
    const DecompositionState s2 = decompose_at(m, motion, t0 + 0.1 * eps, family, false, opts);
    const WeightedOperators& ops = s0.ops;
    const SpMat H1 = ops.K0 + ops.M0;
    SpMat M3(ops.nc(), ops.nc());
    {
        std::vector<Eigen::Triplet<double>> tr;
        for (int c = 0; c < ops.nc(); ++c) tr.emplace_back(c, c, ops.M3[c]);
        M3.setFromTriplets(tr.begin(), tr.end());
    }
    struct Quantity {
        std::string name;
        const SpMat* norm;
        std::function<VectorXd(const DecompositionState&)> get;
        VectorXd dot;
    };
    auto stack_q = [](const std::vector<FEField>& q) {
        int n = 0;
        for (const auto& f : q) n += static_cast<int>(f.values.size());
        VectorXd v(n);
        int o = 0;
        for (const auto& f : q) {
            v.segment(o, f.values.size()) = f.values;
            o += static_cast<int>(f.values.size());
        }
        return v;
    };
    std::vector<Quantity> qs = {
        {"q_dot", &H1, [&](const DecompositionState& s) { return stack_q(s.basis.q); }, stack_q(d.q_dot)},
        {"p_dot", &M3, [](const DecompositionState& s) { return s.triple.p.values; }, d.p_dot.values},
        {"h_dot", &ops.M2, [](const DecompositionState& s) { return s.triple.h.values; }, d.h_dot.values},
        {"w_dot", &ops.M1, [](const DecompositionState& s) { return s.triple.w.values; }, d.w_dot.values},
    };
    std::vector<ConsistencyRow> rows;
    for (const auto& q : qs) {
        const VectorXd x0 = q.get(s0);
        auto blockwise = [&](const VectorXd& v) {
            // H1 of the stacked q_k: apply the norm block by block
            if (q.norm->rows() == v.size()) return wnorm(*q.norm, v);
            double s = 0.0;
            const int n = static_cast<int>(q.norm->rows());
            for (int o = 0; o + n <= v.size(); o += n) s += std::pow(wnorm(*q.norm, v.segment(o, n)), 2);
            return std::sqrt(s);
        };
        ConsistencyRow r;
        r.quantity = q.name;
        r.eps = eps;
        r.scale = blockwise(q.dot);
        const double sc = r.scale > 0.0 ? r.scale : 1.0;
        r.err_eps = blockwise((q.get(s1) - x0) / eps - q.dot) / sc;
        r.err_eps10 = blockwise((q.get(s2) - x0) / (0.1 * eps) - q.dot) / sc;
        r.ratio = r.err_eps10 > 0.0 ? r.err_eps / r.err_eps10 : 0.0;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace mdhw
