#include "mdhw/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "mdhw/cutoff.hpp"
#include "mdhw/decomposition.hpp"
#include "mdhw/galerkin.hpp"
#include "mdhw/harmonic.hpp"
#include "mdhw/io.hpp"
#include "mdhw/rng.hpp"
#include "mdhw/timedep.hpp"

namespace mdhw {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string bare_message(const Error& e) {
    const std::string w = e.what(), prefix = e.kind() + ": ";
    return w.rfind(prefix, 0) == 0 ? w.substr(prefix.size()) : w;
}

// Runs f, re-raising library errors with the module and operation attached.
template <class F>
auto guarded(const char* module, const char* operation, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ScenarioFailure&) {
        throw;
    } catch (const Error& e) {
        throw ScenarioFailure(e.kind(), module, operation, bare_message(e));
    } catch (const std::exception& e) {
        throw ScenarioFailure("InternalError", module, operation, e.what());
    }
}

json config_json(const RunConfig& c) {
    json j;
    j["scenario"] = c.scenario;
    j["seed"] = c.seed;
    j["geometry"] = {{"kind", c.geometry}, {"R0", c.R0}, {"R1", c.R1}, {"major", c.major}, {"minor", c.minor},
                     {"mesh_file", c.mesh_file}};
    j["resolution"] = c.resolution;
    j["motion"] = {{"name", c.motion},       {"lambda0", c.lambda0}, {"amplitude", c.amplitude},
                   {"period", c.period},     {"shear", c.shear},     {"omega", c.omega}};
    j["time"] = {{"T", c.horizon()}, {"steps", c.steps}, {"samples", c.samples}};
    j["galerkin"] = {{"m", c.m},
                     {"forcing", c.forcing},
                     {"forcing_amplitude", c.forcing_amplitude},
                     {"quadrature", {c.n_r, c.n_theta, c.n_phi}},
                     {"max_iters", c.max_iters},
                     {"tol", c.fp_tol},
                     {"ball_starts", c.ball_starts},
                     {"smallness_resolution", c.smallness_resolution}};
    j["cutoff"] = {{"rho", c.rho}, {"delta", c.delta}};
    j["beta"] = {{"field", c.beta}, {"flux", c.flux}};
    return j;
}

json vec_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

std::vector<double> time_grid(const RunConfig& c) {
    std::vector<double> t(c.samples);
    for (int i = 0; i < c.samples; ++i) t[i] = c.horizon() * i / c.samples;
    return t;
}

double m2_norm(const WeightedOperators& ops, const VectorXd& v) { return std::sqrt(v.dot(ops.M2 * v)); }

std::vector<Vec3> physical_points(const ReferenceMesh& m, const DomainMotion& motion, double t) {
    std::vector<Vec3> x(m.nv());
    for (int a = 0; a < m.nv(); ++a) x[a] = to_vec(motion.phi_inv(to_v3(m.vertices[a]), t));
    return x;
}

bool affine_motion(const std::string& name) { return name == "identity" || name == "dilation" || name == "shear"; }
bool radial_motion(const std::string& name) {
    return name == "identity" || name == "dilation" || name == "pulsating_annulus";
}

json geometry_report_json(const GeometryReport& r) {
    json j;
    j["motion"] = r.motion;
    j["analytic"] = r.analytic;
    j["tolerance"] = r.tolerance;
    json res;
    for (const auto& [k, v] : r.residuals) res[k] = v;
    j["residuals"] = res;
    j["pass"] = r.pass;
    return j;
}

// ---- verify-geometry ----

int run_verify_geometry(const RunConfig& c, json& rep, std::vector<std::string>& files) {
    const MotionPtr motion = make_motion(c);
    const auto pts = default_sample_points(c.points, c.seed);
    const auto times = time_grid(c);
    const GeometryReport an =
        guarded("geometry_kernel", "verify_geometry_identities", [&] { return verify_geometry_identities(*motion, pts, times); });
    // the same maps with derivatives by finite differences
    const CallableMotion fd(
        motion->name() + "_fd", [motion](const V3<double>& x, double t) { return motion->phi(x, t); },
        [motion](const V3<double>& y, double s) { return motion->phi_inv(y, s); }, motion->period(),
        motion->sample_point());
    const GeometryReport fr =
        guarded("geometry_kernel", "verify_geometry_identities", [&] { return verify_geometry_identities(fd, pts, times); });
    rep["analytic"] = geometry_report_json(an);
    rep["finite_difference"] = geometry_report_json(fr);

    bool pass = an.pass && fr.pass;
    if (c.div_probes > 0) {
        const ReferenceMesh mesh = guarded("mesh_disc", "generate", [&] { return make_mesh(c); });
        CounterRng rng(c.seed, 2);
        CsvWriter csv((fs::path(c.output_dir) / "divergence.csv").string(), {"probe", "t", "defect"});
        double worst = 0.0;
        for (int k = 0; k < c.div_probes; ++k) {
            VectorXd u(3 * mesh.nv());
            for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);
            const double t = times[k % times.size()];
            const double d = guarded("geometry_kernel", "pushforward",
                                     [&] { return divergence_preservation_defect(mesh, *motion, t, u); });
            csv.cell(k).cell(t).cell(d).end_row();
            worst = std::max(worst, d);
        }
        files.push_back("divergence.csv");
        // cell-wise equality is exact only when the nodal pushforward of a P1 field is again P1
        const bool exact = affine_motion(c.motion);
        rep["divergence"] = {{"probes", c.div_probes}, {"max_defect", worst}, {"exact", exact},
                             {"tolerance", 1e-6}, {"pass", !exact || worst <= 1e-6}};
        pass = pass && (!exact || worst <= 1e-6);
    }
    rep["pass"] = pass;
    return pass ? kExitOk : kExitChecksFailed;
}

// ---- decompose ----

int run_decompose(const RunConfig& c, bool strict, json& rep, std::vector<std::string>& files) {
    const MotionPtr motion = make_motion(c);
    const ReferenceMesh mesh = guarded("mesh_disc", "generate", [&] { return make_mesh(c); });
    const double t = c.decompose_time;
    const WeightedOperators ops =
        guarded("mesh_disc", "assemble_weighted", [&] { return assemble_weighted(mesh, *motion, t); });
    HarmonicOptions ho;
    ho.rel_tol = c.cg_tol;
    const HarmonicBasis basis = guarded("harmonic_fields", "solve_harmonic_potentials", [&] {
        return gram_schmidt_vhar(solve_harmonic_potentials(mesh, ops, ho), ops);
    });
    const CutPotentialBasis cuts =
        guarded("harmonic_fields", "solve_cut_potentials", [&] { return solve_cut_potentials(mesh, ops, ho); });
    DecompositionOptions dopt;
    dopt.rel_tol = c.cg_tol;

    rep["mesh"] = {{"vertices", mesh.nv()}, {"cells", mesh.nt()}, {"K", basis.K()}, {"L", cuts.L()}};
    rep["time"] = t;
    rep["strict"] = strict;
    json alpha = json::array();
    for (int j = 0; j < basis.K(); ++j) alpha.push_back(vec_json(basis.alpha.row(j).transpose()));
    rep["alpha"] = alpha;

    std::vector<std::string> header{"field", "residual", "orth_h_curl", "orth_h_grad", "orth_curl_grad", "div_defect"};
    for (int k = 0; k < basis.K(); ++k) header.push_back("coeff_h_" + std::to_string(k + 1));
    for (int l = 0; l < cuts.L(); ++l) header.push_back("flux_w_" + std::to_string(l + 1));
    CsvWriter csv((fs::path(c.output_dir) / "decompose.csv").string(), header);
    files.push_back("decompose.csv");

    json fields = json::array();
    bool pass = true;
    HWTriple first;
    for (int k = 0; k < c.n_fields; ++k) {
        FEField f{FieldKind::Face, {}};
        if (c.field == "solenoidal")
            f = random_solenoidal_probe(mesh, ops, c.seed, k);
        else
            f.values = interpolate_face(mesh, *motion, t, named_field(c.field, c.seed, k));
        HWTriple r;
        if (strict) {
            const SolenoidalParts s = guarded("hw_decomposition", "decompose_solenoidal",
                                              [&] { return decompose_solenoidal(f, basis, cuts, ops, dopt); });
            r.time = t;
            r.h = s.h;
            r.w = s.w;
            r.curl_w = s.curl_w;
            r.p = {FieldKind::Cell, VectorXd::Zero(mesh.nt())};
            r.grad_p = {FieldKind::Face, VectorXd::Zero(mesh.nf())};
            r.coeffs_h = s.coeffs_h;
            r.fluxes_w = s.fluxes_w;
            const double fn = m2_norm(ops, f.values);
            r.residual = fn > 0 ? m2_norm(ops, f.values - s.h.values - s.curl_w.values) / fn : 0.0;
            r.orth_h_curl = fn > 0 ? std::abs(s.h.values.dot(ops.M2 * s.curl_w.values)) / (fn * fn) : 0.0;
            r.div_defect = s.div_defect;
        } else {
            r = guarded("hw_decomposition", "decompose_general",
                        [&] { return decompose_general(f, basis, cuts, ops, dopt); });
        }
        const bool ok = r.residual <= 1e-6 && r.orth_h_curl <= 1e-6 && r.orth_h_grad <= 1e-6 &&
                        r.orth_curl_grad <= 1e-6 && (r.fluxes_w.size() == 0 || r.fluxes_w.cwiseAbs().maxCoeff() <= 1e-8);
        pass = pass && ok;
        fields.push_back({{"index", k},
                          {"residual", r.residual},
                          {"orth_h_curl", r.orth_h_curl},
                          {"orth_h_grad", r.orth_h_grad},
                          {"orth_curl_grad", r.orth_curl_grad},
                          {"div_defect", r.div_defect},
                          {"coeffs_h", vec_json(r.coeffs_h)},
                          {"fluxes_w", vec_json(r.fluxes_w)},
                          {"pass", ok}});
        csv.cell(k).cell(r.residual).cell(r.orth_h_curl).cell(r.orth_h_grad).cell(r.orth_curl_grad).cell(r.div_defect);
        for (Eigen::Index i = 0; i < r.coeffs_h.size(); ++i) csv.cell(r.coeffs_h[i]);
        for (Eigen::Index i = 0; i < r.fluxes_w.size(); ++i) csv.cell(r.fluxes_w[i]);
        csv.end_row();
        if (k == 0) first = r;
    }
    rep["fields"] = fields;

    const CutoffProfile cut = guarded("leray_cutoff", "build_cutoff", [&] { return build_cutoff(mesh, c.rho, c.delta); });
    const double ratio = gradient_bound_ratio(cut);
    rep["cutoff"] = {{"rho", c.rho}, {"delta", c.delta}, {"lambda", cut.lambda}, {"gradient_bound_ratio", ratio}};

    // snapshot of the first field
    VectorXd bound(mesh.nv());
    for (int a = 0; a < mesh.nv(); ++a)
        bound[a] = cut.grad_theta.values.segment<3>(3 * a).norm() * cut.distance.values[a] / c.rho;
    const VectorXd p_nodal = cell_to_nodal_dirichlet(mesh, first.p.values);
    write_vtk((fs::path(c.output_dir) / "decompose.vtk").string(), "decomposition", physical_points(mesh, *motion, t),
              mesh.tets,
              {{"h", cells_to_nodes(mesh, face_field_cells(mesh, *motion, t, first.h.values))},
               {"curl_w", cells_to_nodes(mesh, face_field_cells(mesh, *motion, t, first.curl_w.values))},
               {"grad_p", cells_to_nodes(mesh, face_field_cells(mesh, *motion, t, first.grad_p.values))},
               {"p", p_nodal},
               {"theta", cut.theta.values},
               {"grad_theta_d_over_rho", bound}});
    files.push_back("decompose.vtk");
    rep["pass"] = pass;
    return pass ? kExitOk : kExitChecksFailed;
}

// ---- differentiate ----

int run_differentiate(const RunConfig& c, json& rep, std::vector<std::string>& files) {
    const MotionPtr motion = make_motion(c);
    const ReferenceMesh mesh = guarded("mesh_disc", "generate", [&] { return make_mesh(c); });
    const FaceFamily family = physical_face_family(named_field(c.field, c.seed, 0));
    CsvWriter csv((fs::path(c.output_dir) / "differentiate.csv").string(),
                  {"anchor", "quantity", "fd-error(eps)", "fd-error(eps/10)", "ratio"});
    files.push_back("differentiate.csv");
    json anchors = json::array();
    for (double t0 : c.anchors) {
        const AnchorFrame frame = guarded("timedep_derivatives", "make_anchor", [&] { return make_anchor(mesh, motion, t0); });
        const auto rows = guarded("timedep_derivatives", "consistency_table",
                                  [&] { return consistency_table(frame, family, c.eps); });
        double top = 0.0;
        for (const auto& r : rows) top = std::max(top, r.scale);
        json jr = json::array();
        for (const auto& r : rows) {
            csv.cell(t0).cell(r.quantity).cell(r.err_eps).cell(r.err_eps10).cell(r.ratio).end_row();
            // a derivative that vanishes (q_dot under a dilation) has relative errors of pure roundoff
            const bool vanishing = r.scale <= 1e-6 * top;
            json row{{"quantity", r.quantity}, {"eps", r.eps},     {"err_eps", r.err_eps},
                     {"err_eps10", r.err_eps10}, {"ratio", r.ratio}, {"scale", r.scale},
                     {"vanishing", vanishing}};
            row["in_window"] = vanishing ? json(nullptr) : json(r.ratio >= 6.0 && r.ratio <= 14.0);
            jr.push_back(row);
        }
        anchors.push_back({{"anchor", t0}, {"rows", jr}});
    }
    rep["richardson_window"] = {6.0, 14.0};
    rep["anchors"] = anchors;
    return kExitOk;
}

// ---- estimate-constant ----

int run_estimate_constant(const RunConfig& c, json& rep, std::vector<std::string>& files) {
    const MotionPtr motion = make_motion(c);
    const ReferenceMesh mesh = guarded("mesh_disc", "generate", [&] { return make_mesh(c); });
    CsvWriter csv((fs::path(c.output_dir) / "estimate_constant.csv").string(), {"t", "C_omega"});
    files.push_back("estimate_constant.csv");
    json vals = json::array();
    double lo = INFINITY, hi = 0.0;
    for (double t : time_grid(c)) {
        DecompositionOptions dopt;
        dopt.rel_tol = c.cg_tol;
        const double v = guarded("hw_decomposition", "estimate_C_omega",
                                 [&] { return estimate_C_omega(mesh, *motion, t, c.probes, c.seed, dopt); });
        csv.cell(t).cell(v).end_row();
        vals.push_back({{"t", t}, {"C_omega", v}});
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const bool finite = std::isfinite(hi) && lo > 0.0;
    rep["samples"] = vals;
    rep["max"] = hi;
    rep["min"] = lo;
    rep["max_over_min"] = finite ? hi / lo : INFINITY;
    rep["pass"] = finite && hi / lo <= 2.0;
    return kExitOk;
}

// ---- solve-periodic ----

GalerkinProblem galerkin_problem(const RunConfig& c) {
    GalerkinProblem p;
    p.motion = make_motion(c);
    p.period = c.horizon();
    p.m = c.m;
    p.steps = c.steps;
    p.rho1 = c.R1;
    p.rho0 = c.R0;
    p.n_r = c.n_r;
    p.n_theta = c.n_theta;
    p.n_phi = c.n_phi;
    p.lift = c.beta == "radial" ? radial_lift(c.flux) : zero_field();
    if (c.forcing == "swirl")
        p.forcing = swirl_forcing(c.forcing_amplitude, c.horizon());
    else if (c.forcing == "steady")
        p.forcing = steady_swirl(c.forcing_amplitude);
    return p;
}

int run_solve_periodic(const RunConfig& c, json& rep, std::vector<std::string>& files) {
    if (c.geometry != "annulus") throw BadParameters("solve-periodic needs geometry.kind = annulus");
    const GalerkinProblem prob = galerkin_problem(c);
    const GalerkinSystem sys =
        guarded("galerkin_periodic", "assemble_stage", [&] { return GalerkinSystem(prob); });
    const int m = sys.m();
    double orth = 0.0;
    for (int i = 0; i < sys.num_stages(); ++i) orth = std::max(orth, sys.stage(i).orth_defect);
    rep["system"] = {{"m", m}, {"steps", sys.steps()}, {"dt", sys.dt()}, {"max_orth_defect", orth}};

    // smallness: analytic lift, closed form and the discrete harmonic field
    const SmallnessReport sm = check_smallness(sys);
    json small{{"margin", sm.margin}, {"pass", sm.pass}};
    bool closed_ok = true;
    if (radial_motion(c.motion)) {
        double closed = 0.0, printed = 0.0;
        for (double t : sm.times) {
            const double r1 = to_vec(prob.motion->phi_inv({c.R1, 0.0, 0.0}, t)).norm();
            const double r0 = to_vec(prob.motion->phi_inv({c.R0, 0.0, 0.0}, t)).norm();
            closed = std::max(closed, sobolev_constant() * annulus_l3_closed_form(r1, r0, c.flux));
            printed = std::max(printed, sobolev_constant() * annulus_l3_printed(r1, r0, c.flux));
        }
        const double rel = closed > 0 ? std::abs(sm.margin - closed) / closed : std::abs(sm.margin);
        closed_ok = rel <= 0.05;
        small["closed_form"] = closed;
        small["printed_form"] = printed;
        small["closed_form_rel_diff"] = rel;
    }
    if (c.beta == "radial") {
        const ReferenceMesh sm_mesh =
            guarded("mesh_disc", "generate", [&] { return generate_annulus_mesh(c.R0, c.R1, c.smallness_resolution); });
        const SmallnessReport fe = guarded("galerkin_periodic", "check_smallness", [&] {
            return check_smallness(sm_mesh, *prob.motion, time_grid(c), VectorXd::Constant(1, c.flux));
        });
        small["fe_margin"] = fe.margin;
        small["fe_resolution"] = c.smallness_resolution;
    }
    rep["smallness"] = small;

    const BallRadius ball = guarded("galerkin_periodic", "ball_radius", [&] { return ball_radius(sys); });
    rep["ball"] = {{"R", ball.R},
                   {"gamma", ball.gamma},
                   {"margin", ball.margin},
                   {"lambda_min", ball.lambda_min},
                   {"multiplier", ball.multiplier},
                   {"integral_2K", ball.integral_2K}};

    // ball invariance from random starts
    CounterRng rng(c.seed, 3);
    json starts = json::array();
    bool inv_ok = true;
    for (int s = 0; s < c.ball_starts; ++s) {
        VectorXd a(m);
        for (int k = 0; k < m; ++k) a[k] = rng.normal();
        a *= ball.R * std::cbrt(rng.uniform()) / a.norm();
        const double pa = guarded("galerkin_periodic", "poincare_map", [&] { return poincare_map(sys, a).norm(); });
        const bool ok = pa <= ball.R * 1.001;
        inv_ok = inv_ok && ok;
        starts.push_back({{"norm_a", a.norm()}, {"norm_Pa", pa}, {"ok", ok}});
    }
    rep["ball_invariance"] = {{"starts", starts}, {"pass", inv_ok}};

    FixedPointOptions fo;
    fo.max_iters = c.max_iters;
    fo.tol = c.fp_tol;
    const PeriodicResult r = guarded("galerkin_periodic", "find_periodic",
                                     [&] { return find_periodic(sys, VectorXd::Zero(m), ball.R, fo); });
    {
        CsvWriter csv((fs::path(c.output_dir) / "residual_history.csv").string(),
                      {"iteration", "residual", "norm_a", "norm_Pa", "method"});
        for (size_t i = 0; i < r.residual_history.size(); ++i)
            csv.cell(static_cast<long long>(i))
                .cell(r.residual_history[i])
                .cell(r.iterate_norms[i])
                .cell(r.image_norms[i])
                .cell(r.method[i])
                .end_row();
        files.push_back("residual_history.csv");
    }
    json fp{{"converged", r.converged},
            {"iterations", r.residual_history.size()},
            {"final_residual", r.residual_history.empty() ? 0.0 : r.residual_history.back()},
            {"tolerance", c.fp_tol},
            {"ball_ok", r.ball_ok},
            {"norm_a", r.a.norm()},
            {"a", vec_json(r.a)}};
    json hist = json::array();
    for (double v : r.residual_history) hist.push_back(v);
    fp["residual_history"] = hist;
    rep["fixed_point"] = fp;

    const TrajectoryState& tr = r.trajectory;
    {
        CsvWriter csv((fs::path(c.output_dir) / "energy_ledger.csv").string(),
                      {"t", "kinetic", "dissipation", "convective", "source", "edi_defect", "bound_K"});
        for (const auto& e : tr.energy)
            csv.cell(e.t).cell(e.kinetic).cell(e.dissipation).cell(e.convective).cell(e.source).cell(e.edi_defect)
                .cell(e.bound_K)
                .end_row();
        files.push_back("energy_ledger.csv");
    }
    rep["energy"] = {{"max_edi_defect", tr.max_edi_defect},
                     {"max_antisymmetry_defect", tr.max_antisymmetry_defect},
                     {"pass", tr.max_edi_defect <= 1e-6 && tr.max_antisymmetry_defect <= 1e-10}};

    double reint = NAN;
    if (r.converged) {
        const GalerkinSystem next =
            guarded("galerkin_periodic", "assemble_stage", [&] { return GalerkinSystem(prob, c.horizon()); });
        const TrajectoryState tr2 = guarded("galerkin_periodic", "integrate", [&] { return integrate(next, tr.h.back()); });
        reint = (tr2.h.back() - tr.h.back()).norm();
        rep["reintegration"] = {{"norm_u2T_minus_uT", reint}, {"tolerance", 2e-6}, {"pass", reint <= 2e-6}};
    }

    // snapshots of u = b + sum h_j psi_j at the mesh vertices
    const ReferenceMesh mesh =
        guarded("mesh_disc", "generate", [&] { return generate_annulus_mesh(c.R0, c.R1, c.resolution); });
    ShellQuadrature vq;
    vq.rho1 = c.R1;
    vq.rho0 = c.R0;
    vq.points = mesh.vertices;
    vq.weights.assign(mesh.nv(), 1.0);
    const ShellBasis vb = make_shell_basis(vq, m, prob.ordering);
    for (int i = 0; i <= sys.steps(); i += c.vtk_stride) {
        const double t = sys.t_start() + i * sys.dt();
        const VectorXd coef = sys.stage(2 * i).orth.mu.transpose() * tr.h[i];  // u - b = sum_k coef_k U_k
        VectorXd u(3 * mesh.nv()), b(3 * mesh.nv());
        std::vector<Vec3> x(mesh.nv());
        for (int a = 0; a < mesh.nv(); ++a) {
            const PointFrame fr = frame_at_ref(*prob.motion, mesh.vertices[a], t);
            Vec3 ut = Vec3::Zero();
            for (int k = 0; k < m; ++k) ut += coef[k] * vb.value[a][k];
            x[a] = fr.x;
            b.segment<3>(3 * a) = prob.lift.value(fr.x, t);
            u.segment<3>(3 * a) = fr.A * ut + b.segment<3>(3 * a);
        }
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%04d.vtk", i);
        write_vtk((fs::path(c.output_dir) / name).string(), "periodic solution t=" + format_double(t), x, mesh.tets,
                  {{"u", u}, {"lift", b}});
        files.push_back(name);
    }

    const bool pass = sm.margin <= 0.5 && closed_ok && inv_ok && r.converged && r.ball_ok &&
                      tr.max_edi_defect <= 1e-6 && reint <= 2e-6;
    rep["pass"] = pass;
    if (!r.converged) {
        rep["status"] = "NoConvergence";
        return kExitNoConvergence;
    }
    return pass ? kExitOk : kExitChecksFailed;
}

void write_report(const RunConfig& c, const json& rep, std::string& text) {
    text = rep.dump(2) + "\n";
    std::ofstream os(fs::path(c.output_dir) / "report.json", std::ios::binary);
    if (!os) throw ScenarioFailure("BadParameters", "cli_io", "write_report", "cannot write report.json");
    os << text;
}

}  // namespace

VectorFn named_field(const std::string& name, std::uint64_t seed, int k) {
    if (name == "x") return [](const Vec3& x) { return x; };
    if (name == "swirl") return [](const Vec3& x) { return Vec3(-x[1], x[0], 0.0); };
    CounterRng rng(seed, 100 + static_cast<std::uint64_t>(k));
    std::array<double, 18> c;
    for (double& v : c) v = rng.uniform(-1.0, 1.0);
    if (name == "solenoidal") {
        // component i depends only on the other two coordinates
        return [c](const Vec3& x) {
            Vec3 u;
            for (int i = 0; i < 3; ++i) {
                const double a = x[(i + 1) % 3], b = x[(i + 2) % 3];
                u[i] = c[6 * i] * std::sin((1 + c[6 * i + 1]) * a + c[6 * i + 2]) +
                       c[6 * i + 3] * std::cos((1 + c[6 * i + 4]) * b) + c[6 * i + 5] * a * b;
            }
            return u;
        };
    }
    if (name == "mixed") {
        return [c](const Vec3& x) {
            Vec3 u;
            for (int i = 0; i < 3; ++i)
                u[i] = c[6 * i] * x[i] + c[6 * i + 1] * x[(i + 1) % 3] +
                       c[6 * i + 2] * std::sin((1 + c[6 * i + 3]) * x[(i + 2) % 3] + c[6 * i + 4]) +
                       c[6 * i + 5] * x[0] * x[1] * x[2];
            return u;
        };
    }
    throw BadParameters("unknown field '" + name + "'");
}

ScenarioOutcome run_scenario(const RunConfig& c, bool strict) {
    const std::vector<std::string> bad = validate(c);
    if (!bad.empty()) throw ValidationError(bad);
    std::error_code ec;
    fs::create_directories(c.output_dir, ec);
    if (ec) throw ScenarioFailure("BadParameters", "cli_io", "run_scenario", "cannot create '" + c.output_dir + "'");

    ScenarioOutcome out;
    json rep;
    rep["scenario"] = c.scenario;
    rep["status"] = "ok";
    rep["config"] = config_json(c);
    try {
        if (c.scenario == "verify-geometry")
            out.status = run_verify_geometry(c, rep, out.artifacts);
        else if (c.scenario == "decompose")
            out.status = run_decompose(c, strict, rep, out.artifacts);
        else if (c.scenario == "differentiate")
            out.status = run_differentiate(c, rep, out.artifacts);
        else if (c.scenario == "estimate-constant")
            out.status = run_estimate_constant(c, rep, out.artifacts);
        else
            out.status = run_solve_periodic(c, rep, out.artifacts);
        if (out.status == kExitChecksFailed) rep["status"] = "checks_failed";
    } catch (const ScenarioFailure& e) {
        rep["status"] = "error";
        rep["error"] = {{"kind", e.kind()}, {"module", e.module()}, {"operation", e.operation()}, {"message", bare_message(e)}};
        std::string text;
        write_report(c, rep, text);
        throw;
    } catch (const Error& e) {
        rep["status"] = "error";
        rep["error"] = {{"kind", e.kind()}, {"module", "cli_io"}, {"operation", c.scenario}, {"message", bare_message(e)}};
        std::string text;
        write_report(c, rep, text);
        throw ScenarioFailure(e.kind(), "cli_io", c.scenario, bare_message(e));
    }
    write_report(c, rep, out.report);
    out.artifacts.push_back("report.json");
    return out;
}

}  // namespace mdhw
