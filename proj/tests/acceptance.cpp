// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "mdhw/config.hpp"
#include "mdhw/cutoff.hpp"
#include "mdhw/decomposition.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/galerkin.hpp"
#include "mdhw/harmonic.hpp"
#include "mdhw/rng.hpp"
#include "mdhw/scenarios.hpp"
#include "mdhw/timedep.hpp"

using namespace mdhw;
namespace fs = std::filesystem;

namespace {

const double kPi = std::acos(-1.0);

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char b[64];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

// ---- 1. geometric identities ----

Verdict geometry_identities() {
    const auto pts = default_sample_points(12, 5);
    const std::vector<double> times{0.0, 0.3, 1.2, 2.5, 4.0};
    const std::vector<MotionPtr> motions{make_identity(2 * kPi), make_dilation(1.0, 0.1, 2 * kPi),
                                         make_shear(0.1, 1.0)};
    double worst_an = 0.0, worst_fd = 0.0;
    for (const auto& m : motions) {
        const GeometryReport an = verify_geometry_identities(*m, pts, times);
        const CallableMotion fd(
            m->name() + "_fd", [m](const V3<double>& x, double t) { return m->phi(x, t); },
            [m](const V3<double>& y, double s) { return m->phi_inv(y, s); }, m->period(), m->sample_point());
        const GeometryReport fr = verify_geometry_identities(fd, pts, times);
        for (const auto& [k, v] : an.residuals) worst_an = std::max(worst_an, v);
        for (const auto& [k, v] : fr.residuals) worst_fd = std::max(worst_fd, v);
    }
    return {worst_an <= 1e-7 && worst_fd <= 1e-4,
            "max analytic residual " + fmt("%.2e", worst_an) + " (<= 1e-7), finite-difference " + fmt("%.2e", worst_fd) +
                " (<= 1e-4)"};
}

// ---- 2. divergence preservation ----

Verdict divergence_preservation() {
    const ReferenceMesh mesh = generate_annulus_mesh(2.0, 1.0, 8);
    const std::vector<MotionPtr> motions{make_identity(), make_dilation(1.0, 0.1, 2 * kPi), make_shear(0.1, 1.0)};
    CounterRng rng(2024);
    double worst = 0.0;
    for (const auto& m : motions)
        for (int k = 0; k < 20; ++k) {
            VectorXd u(3 * mesh.nv());
            for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = rng.uniform(-1.0, 1.0);
            worst = std::max(worst, divergence_preservation_defect(mesh, *m, rng.uniform(0.0, 2 * kPi), u));
        }
    return {worst <= 1e-6, "max cell |div_x u - div_y u~| " + fmt("%.2e", worst) + " over 60 fields (<= 1e-6)"};
}

// ---- 3. annulus harmonic field ----

Verdict annulus_harmonic() {
    IdentityMotion id;
    double err[2];
    int i = 0;
    for (int res : {8, 16}) {
        const ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, res);
        const WeightedOperators ops = assemble_weighted(m, id, 0.0);
        const HarmonicBasis b = solve_harmonic_potentials(m, ops);
        // q1 = 1 on r = 1, 0 on r = 2: grad q1 = -2 x / |x|^3
        err[i++] = nodal_vector_l2_error(m, id, 0.0, b.grad_q_nodal[0].values,
                                         [](const Vec3& x) { return Vec3(-2.0 * x / std::pow(x.norm(), 3)); });
    }
    const double ratio = err[0] / err[1];
    return {err[1] <= 0.02 && ratio >= 3.2 && ratio <= 4.8,
            "rel L2 error at 16 " + fmt("%.4f", err[1]) + " (<= 0.02), halving ratio " + fmt("%.3f", ratio) +
                " (in [3.2, 4.8])"};
}

// ---- 4. dilation scaling ----

Verdict dilation_scaling() {
    const ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 16);
    const MotionPtr dil = make_dilation(1.0, 0.1, 2 * kPi);
    const auto* d = dynamic_cast<const DilationMotion*>(dil.get());
    double a_ref = 0.0, worst_a = 0.0, worst_eta = 0.0;
    std::vector<Vec3> eta_ref;
    for (int i = 0; i < 9; ++i) {
        const double t = 2 * kPi * i / 9.0, lam = d->lambda(t);
        const WeightedOperators ops = assemble_weighted(m, *dil, t);
        const HarmonicBasis b = gram_schmidt_vhar(solve_harmonic_potentials(m, ops), ops);
        const double a = b.alpha(0, 0) * std::sqrt(lam);
        std::vector<Vec3> eta = face_field_cells(m, *dil, t, b.eta[0].values);
        for (auto& v : eta) v *= std::pow(lam, 1.5);
        if (i == 0) {
            a_ref = a;
            eta_ref = eta;
            continue;
        }
        worst_a = std::max(worst_a, std::abs(a - a_ref) / std::abs(a_ref));
        for (int c = 0; c < m.nt(); ++c)
            worst_eta = std::max(worst_eta, (eta[c] - eta_ref[c]).norm() / eta_ref[c].norm());
    }
    return {worst_a <= 0.01 && worst_eta <= 0.01,
            "alpha11 lambda^1/2 spread " + fmt("%.2e", worst_a) + ", eta1 lambda^3/2 spread " + fmt("%.2e", worst_eta) +
                " (each <= 1e-2, 9 samples)"};
}

// ---- 5. cut-off ----

Verdict cutoff_exactness() {
    const ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 16);
    bool exact = true;
    double worst = 0.0;
    for (double rho : {0.5, 0.25, 0.125}) {
        const CutoffProfile c = build_cutoff(m, rho, rho / 4);
        const VectorXd& d = c.distance.values;
        const VectorXd& th = c.theta.values;
        for (int v = 0; v < m.nv(); ++v) {
            if (d[v] < 0.5 * std::exp(-2.0 / rho) && th[v] != 1.0) exact = false;
            if (d[v] > 2.0 * std::exp(-1.0 / rho) && th[v] != 0.0) exact = false;
        }
        worst = std::max(worst, gradient_bound_ratio(c));
    }
    return {exact && worst <= 1.0 + 1e-6, std::string("plateau/support ") + (exact ? "exact" : "violated") +
                                              ", max |grad theta| d / (2 sqrt3 rho) " + fmt("%.6f", worst) +
                                              " (<= 1 + 1e-6)"};
}

// ---- 6. decomposition ----

Verdict decomposition() {
    struct Case {
        ReferenceMesh mesh;
        MotionPtr motion;
        double t;
    };
    std::vector<Case> cases;
    cases.push_back({generate_annulus_mesh(2.0, 1.0, 8), make_pulsating_annulus(2.0, 1.0, 0.05, 1.0), 0.3});
    cases.push_back({generate_solid_torus_mesh(2.0, 0.5, 8), make_shear(0.2, 1.0), 0.4});
    double res = 0.0, orth = 0.0, flux = 0.0;
    for (const Case& cs : cases) {
        const WeightedOperators ops = assemble_weighted(cs.mesh, *cs.motion, cs.t);
        const HarmonicBasis basis = gram_schmidt_vhar(solve_harmonic_potentials(cs.mesh, ops), ops);
        const CutPotentialBasis cuts = solve_cut_potentials(cs.mesh, ops);
        for (int k = 0; k < 10; ++k) {
            const FEField f{FieldKind::Face, interpolate_face(cs.mesh, *cs.motion, cs.t, named_field("mixed", 6, k))};
            const HWTriple r = decompose_general(f, basis, cuts, ops);
            res = std::max(res, r.residual);
            orth = std::max({orth, r.orth_h_curl, r.orth_h_grad, r.orth_curl_grad});
            if (r.fluxes_w.size() > 0) flux = std::max(flux, r.fluxes_w.cwiseAbs().maxCoeff());
        }
    }
    return {res <= 1e-6 && orth <= 1e-6 && flux <= 1e-8,
            "annulus + torus at resolution 8, 10 fields each: residual " + fmt("%.2e", res) + ", orthogonality " +
                fmt("%.2e", orth) + " (<= 1e-6), Sigma-flux of w " + fmt("%.2e", flux) + " (<= 1e-8)"};
}

// ---- 7. uniform constant ----

Verdict uniform_constant() {
    const ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 8);
    const MotionPtr pul = make_pulsating_annulus(2.0, 1.0, 0.05, 1.0);
    double lo = INFINITY, hi = 0.0;
    for (int i = 0; i < 9; ++i) {
        const double c = estimate_C_omega(m, *pul, i / 9.0, 8, 1);
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    const bool finite = std::isfinite(hi) && lo > 0.0;
    return {finite && hi / lo <= 2.0, "C_omega in [" + fmt("%.4f", lo) + ", " + fmt("%.4f", hi) + "], max/min " +
                                          fmt("%.4f", hi / lo) + " (<= 2)"};
}

// ---- 8. derivative consistency ----

Verdict derivative_consistency() {
    const FaceFamily fam = physical_face_family([](const Vec3& x) {
        return Vec3(x[0] + 0.3 * std::sin(x[1]), x[1] + 0.2 * std::cos(x[2]) - x[0], x[2] + 0.1 * x[0] * x[1]);
    });
    const ReferenceMesh mesh = generate_annulus_mesh(2.0, 1.0, 8);
    double lo = INFINITY, hi = 0.0;
    std::ostringstream s;
    auto take = [&](const std::vector<ConsistencyRow>& rows, const std::vector<std::string>& names, const char* tag) {
        for (const auto& r : rows)
            for (const auto& n : names)
                if (r.quantity == n) {
                    lo = std::min(lo, r.ratio);
                    hi = std::max(hi, r.ratio);
                    s << tag << n << " " << fmt("%.2f", r.ratio) << ", ";
                }
    };
    // q_dot vanishes identically under a dilation, so its ratio is taken on the pulsating annulus
    take(consistency_table(make_anchor(mesh, make_dilation(1.0, 0.1, 2 * kPi), 0.5), fam, 1e-2), {"p_dot", "w_dot"},
         "dilation ");
    take(consistency_table(make_anchor(mesh, make_pulsating_annulus(2.0, 1.0, 0.05, 1.0), 0.3), fam, 1e-2),
         {"q_dot", "p_dot", "w_dot"}, "pulsating ");
    return {lo >= 6.0 && hi <= 14.0, s.str() + "ratios in [6, 14]"};
}

// ---- 9-12. periodic solve through the solve-periodic scenario ----

struct PeriodicRuns {
    nlohmann::json report;
    std::string first, second;
    int status = -1;
};

PeriodicRuns& periodic_runs() {
    static PeriodicRuns runs = [] {
        PeriodicRuns r;
        RunConfig c = parse_config(
            "motion.name = pulsating_annulus\n"
            "motion.amplitude = 0.05\n"
            "motion.period = 1\n"
            "beta.flux = 5\n"
            "galerkin.m = 16\n"
            "galerkin.forcing = swirl\n"
            "galerkin.ball_starts = 20\n"
            "seed = 7\n",
            "solve-periodic");
        const fs::path base = fs::temp_directory_path() / "mdhw_acceptance";
        fs::remove_all(base);
        c.output_dir = (base / "run1").string();
        const ScenarioOutcome a = run_scenario(c);
        c.output_dir = (base / "run2").string();
        const ScenarioOutcome b = run_scenario(c);
        r.first = a.report;
        r.second = b.report;
        r.status = a.status;
        r.report = nlohmann::json::parse(a.report);
        return r;
    }();
    return runs;
}

Verdict energy_identity() {
    const auto& e = periodic_runs().report["energy"];
    const double edi = e["max_edi_defect"], anti = e["max_antisymmetry_defect"];
    return {edi <= 1e-6 && anti <= 1e-10, "max relative EDI defect per RK step " + fmt("%.2e", edi) +
                                              " (<= 1e-6 at dt = T/128), |C + C^T| " + fmt("%.2e", anti)};
}

Verdict periodic_solution() {
    const auto& r = periodic_runs().report;
    const double margin = r["smallness"]["margin"], rel = r["smallness"]["closed_form_rel_diff"];
    const double closed = r["smallness"]["closed_form"], fe = r["smallness"]["fe_margin"];
    const double fe_rel = std::abs(fe - closed) / closed;
    const bool conv = r["fixed_point"]["converged"];
    const size_t iters = r["fixed_point"]["iterations"];
    const double final_res = r["fixed_point"]["final_residual"];
    const double reint = conv ? r["reintegration"]["norm_u2T_minus_uT"].get<double>() : NAN;
    const bool pass = margin <= 0.5 && rel <= 0.05 && fe_rel <= 0.05 && conv && final_res <= 1e-6 && iters <= 50 &&
                      reint <= 2e-6;
    return {pass, "margin " + fmt("%.4f", margin) + " (<= 0.5), closed form rel diff " + fmt("%.1e", rel) + " / FE " +
                      fmt("%.3f", fe_rel) + " (<= 0.05), |P(a)-a| " + fmt("%.2e", final_res) + " after " +
                      std::to_string(iters) + " iterations (<= 1e-6, <= 50), |u(2T)-u(T)| " + fmt("%.2e", reint) +
                      " (<= 2e-6)"};
}

Verdict ball_invariance() {
    const auto& r = periodic_runs().report;
    const double R = r["ball"]["R"];
    double worst = 0.0;
    size_t n = 0;
    for (const auto& s : r["ball_invariance"]["starts"]) {
        worst = std::max(worst, s["norm_Pa"].get<double>() / R);
        ++n;
    }
    const bool along = r["fixed_point"]["ball_ok"];
    return {n >= 20 && worst <= 1.001 && along && r["ball"]["margin"].get<double>() <= 0.5,
            std::to_string(n) + " random starts in the ball of radius " + fmt("%.4f", R) + ": max |P(a)|/R " +
                fmt("%.4f", worst) + " (<= 1.001), fixed-point iterates " + (along ? "inside" : "outside")};
}

Verdict determinism() {
    const auto& r = periodic_runs();
    return {!r.first.empty() && r.first == r.second,
            std::string("two solve-periodic runs, seed 7: report.json ") +
                (r.first == r.second ? "bit-identical" : "differs") + " (" + std::to_string(r.first.size()) + " bytes)"};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"geometric identity suite", geometry_identities},
        {"divergence preservation", divergence_preservation},
        {"annulus harmonic field", annulus_harmonic},
        {"dilation scaling of alpha and eta", dilation_scaling},
        {"cut-off exactness", cutoff_exactness},
        {"decomposition residual and orthogonality", decomposition},
        {"uniform constant sampling", uniform_constant},
        {"derivative consistency", derivative_consistency},
        {"energy identity", energy_identity},
        {"periodic solution", periodic_solution},
        {"ball invariance", ball_invariance},
        {"determinism", determinism},
    };
    int failed = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("threw ") + e.what()};
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2zu %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    v.detail.c_str(), sec);
        std::fflush(stdout);
        if (!v.pass) ++failed;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
