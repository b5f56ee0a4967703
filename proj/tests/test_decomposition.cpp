#include <cmath>

#include "doctest.h"
#include "mdhw/decomposition.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/rng.hpp"

using namespace mdhw;

namespace {

VectorXd random_vector(int n, unsigned long long seed) {
    CounterRng rng(seed, 0);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
    return v;
}

double m2_norm(const WeightedOperators& ops, const VectorXd& x) { return std::sqrt(x.dot(ops.M2 * x)); }
double m1_norm(const WeightedOperators& ops, const VectorXd& x) { return std::sqrt(x.dot(ops.M1 * x)); }

// smooth vector potential supported in the open annulus 1 < |x| < 2
Vec3 bump_potential(const Vec3& x) {
    const double r = x.norm();
    if (r <= 1.1 || r >= 1.9) return Vec3::Zero();
    const double s = (r - 1.1) * (1.9 - r);
    return s * s * Vec3(std::sin(x[1]) + 0.5, x[2] * x[0], std::cos(x[0]));
}

Vec3 bump_curl(const Vec3& x) {
    // central differences of the potential, accurate far below the tolerances used here
    const double h = 1e-5;
    Vec3 c;
    auto d = [&](int comp, int dir) {
        Vec3 a = x, b = x;
        a[dir] += h;
        b[dir] -= h;
        return (bump_potential(a)[comp] - bump_potential(b)[comp]) / (2 * h);
    };
    c << d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1);
    return c;
}

struct Setup {
    ReferenceMesh m;
    MotionPtr motion;
    WeightedOperators ops;
    HarmonicBasis basis;
    CutPotentialBasis cuts;

    Setup(ReferenceMesh mesh, MotionPtr mo, double t = 0.0) : m(std::move(mesh)), motion(std::move(mo)) {
        ops = assemble_weighted(m, *motion, t);
        basis = gram_schmidt_vhar(solve_harmonic_potentials(m, ops), ops);
        cuts = solve_cut_potentials(m, ops);
    }
};

}  // namespace

TEST_CASE("scalar potential of a weak gradient returns the potential") {
    Setup s(generate_annulus_mesh(2.0, 1.0, 6), make_pulsating_annulus(2.0, 1.0, 0.1, 1.0), 0.3);
    const VectorXd p0 = random_vector(s.ops.nc(), 4);
    FEField f{FieldKind::Face, weak_gradient(s.ops, p0)};
    ScalarPotential sp = scalar_potential(f, s.ops);
    CHECK((sp.p.values - p0).cwiseAbs().maxCoeff() <= 1e-8 * p0.cwiseAbs().maxCoeff());
    CHECK(sp.solve.rel_residual <= 1e-10);
    CHECK(m2_norm(s.ops, f.values - sp.grad_p.values) <= 1e-8 * m2_norm(s.ops, f.values));
}

TEST_CASE("divergence-free fields have no scalar potential") {
    Setup s(generate_annulus_mesh(2.0, 1.0, 6), make_identity());
    FEField f{FieldKind::Face, s.ops.d1 * random_vector(s.ops.ne(), 5) + s.basis.eta[0].values};
    ScalarPotential sp = scalar_potential(f, s.ops);
    CHECK(m2_norm(s.ops, sp.grad_p.values) <= 1e-10 * m2_norm(s.ops, f.values));
}

TEST_CASE("position field on the unit ball") {
    ReferenceMesh m = generate_ball_mesh(1.0, 16);
    IdentityMotion id;
    WeightedOperators ops = assemble_weighted(m, id, 0.0);
    FEField f{FieldKind::Face, interpolate_face(m, id, 0.0, [](const Vec3& x) { return x; })};
    ScalarPotential sp = scalar_potential(f, ops);
    const VectorXd pn = cell_to_nodal_dirichlet(m, sp.p.values);
    double err = 0.0;
    for (int v = 0; v < m.nv(); ++v) {
        err = std::max(err, std::abs(pn[v] - 0.5 * (m.vertices[v].squaredNorm() - 1.0)));
        if (m.vertex_label[v] >= 0) CHECK(pn[v] == 0.0);
    }
    CHECK(err / 0.5 <= 0.02);
}

TEST_CASE("solenoidal decomposition examples") {
    Setup s(generate_annulus_mesh(2.0, 1.0, 8), make_identity());
    SUBCASE("harmonic input") {
        SolenoidalParts p = decompose_solenoidal(s.basis.eta[0], s.basis, s.cuts, s.ops);
        CHECK(p.coeffs_h[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(m1_norm(s.ops, p.w.values) <= 1e-6);
    }
    SUBCASE("curl of a compactly supported potential") {
        const VectorXd psi = interpolate_edge(s.m, *s.motion, 0.0, bump_potential);
        FEField b{FieldKind::Face, s.ops.d1 * psi / s.ops.J};
        SolenoidalParts p = decompose_solenoidal(b, s.basis, s.cuts, s.ops);
        const double nb = m2_norm(s.ops, b.values);
        CHECK(m2_norm(s.ops, p.h.values) <= 1e-8 * nb);
        const VectorXd oracle = interpolate_face(s.m, *s.motion, 0.0, bump_curl);
        CHECK(m2_norm(s.ops, p.curl_w.values - oracle) <= 0.03 * m2_norm(s.ops, oracle));
        CHECK(p.div_defect <= 1e-8);
    }
    SUBCASE("harmonic plus curl mixture") {
        const VectorXd psi = interpolate_edge(s.m, *s.motion, 0.0, bump_potential);
        FEField pure = s.basis.grad_q[0];
        FEField b{FieldKind::Face, pure.values + s.ops.d1 * psi};
        SolenoidalParts mix = decompose_solenoidal(b, s.basis, s.cuts, s.ops);
        SolenoidalParts ref = decompose_solenoidal(pure, s.basis, s.cuts, s.ops);
        CHECK(mix.coeffs_h[0] == doctest::Approx(ref.coeffs_h[0]).epsilon(0.02));
        const VectorXd r = b.values - mix.h.values - mix.curl_w.values;
        CHECK(m2_norm(s.ops, r) <= 1e-6 * m2_norm(s.ops, b.values));
    }
    SUBCASE("non-solenoidal input is rejected") {
        FEField f{FieldKind::Face, interpolate_face(s.m, *s.motion, 0.0, [](const Vec3& x) { return x; })};
        CHECK_THROWS_AS(decompose_solenoidal(f, s.basis, s.cuts, s.ops), NonSolenoidalInput);
    }
}

TEST_CASE("general decomposition examples") {
    Setup s(generate_annulus_mesh(2.0, 1.0, 6), make_pulsating_annulus(2.0, 1.0, 0.05, 1.0), 0.25);
    const VectorXd p0 = random_vector(s.ops.nc(), 21);
    const VectorXd g0 = weak_gradient(s.ops, p0);
    SUBCASE("pure gradient") {
        HWTriple r = decompose_general({FieldKind::Face, g0}, s.basis, s.cuts, s.ops);
        const double nf = m2_norm(s.ops, g0);
        CHECK(m2_norm(s.ops, r.h.values) <= 1e-8 * nf);
        CHECK(m2_norm(s.ops, r.curl_w.values) <= 1e-8 * nf);
        CHECK((r.p.values - p0).cwiseAbs().maxCoeff() <= 1e-8);
    }
    SUBCASE("harmonic plus gradient") {
        const VectorXd eta = s.basis.eta[0].values;
        HWTriple r = decompose_general({FieldKind::Face, eta + g0}, s.basis, s.cuts, s.ops);
        CHECK(m2_norm(s.ops, r.h.values - eta) <= 0.02 * m2_norm(s.ops, eta));
        CHECK(m2_norm(s.ops, r.grad_p.values - g0) <= 0.02 * m2_norm(s.ops, g0));
    }
    SUBCASE("smooth random fields") {
        for (int k = 0; k < 2; ++k) {
            auto f = [k](const Vec3& x) {
                return Vec3(std::sin(x[1] + k), x[0] * x[2] - k, std::cos((k + 1) * x[0]) + x[1]);
            };
            HWTriple r = decompose_general({FieldKind::Face, interpolate_face(s.m, *s.motion, 0.25, f)},
                                           s.basis, s.cuts, s.ops);
            CHECK(r.residual <= 1e-6);
            CHECK(r.orth_h_curl <= 1e-6);
            CHECK(r.orth_h_grad <= 1e-6);
            CHECK(r.orth_curl_grad <= 1e-6);
            CHECK(r.div_defect <= 1e-8);
        }
    }
}

TEST_CASE("torus decomposition keeps w free of cut flux") {
    Setup s(generate_solid_torus_mesh(2.0, 0.5, 6), make_shear(0.2, 1.0), 0.4);
    auto f = [](const Vec3& x) { return Vec3(-x[1] + 0.3 * x[2], x[0], std::sin(x[0])); };
    HWTriple r = decompose_general({FieldKind::Face, interpolate_face(s.m, *s.motion, 0.4, f)}, s.basis, s.cuts,
                                   s.ops);
    CHECK(r.residual <= 1e-6);
    REQUIRE(r.fluxes_w.size() == 1);
    CHECK(std::abs(r.fluxes_w[0]) <= 1e-8);
    CHECK(r.coeffs_h.size() == 0);
    CHECK(r.orth_curl_grad <= 1e-6);
}

TEST_CASE("the constraints pin w uniquely") {
    Setup s(generate_solid_torus_mesh(2.0, 0.5, 6), make_identity());
    const VectorXd psi = random_vector(s.ops.ne(), 31);
    FEField b{FieldKind::Face, s.ops.d1 * psi};
    SolenoidalParts a = decompose_solenoidal(b, s.basis, s.cuts, s.ops);
    // perturb by a gradient and a cut potential, then re-impose the constraints
    VectorXd w2 = a.w.values + s.ops.d0 * random_vector(s.ops.nv(), 32) + 0.7 * s.cuts.grad_p[0].values;
    CGOptions o;
    o.rel_tol = 1e-12;
    w2 = remove_gradient_part(s.ops, w2, o);
    const VectorXd& P = s.cuts.grad_p[0].values;
    w2 -= (w2.dot(s.ops.M1 * P) / P.dot(s.ops.M1 * P)) * P;
    CHECK(m1_norm(s.ops, w2 - a.w.values) <= 1e-8 * std::max(1.0, m1_norm(s.ops, a.w.values)));
}

TEST_CASE("cut flux of a 2-form is invariant under the pushforward") {
    ReferenceMesh m = generate_solid_torus_mesh(2.0, 0.5, 6);
    MotionPtr shear = make_shear(0.3, 1.0);
    const double t = 0.8;
    WeightedOperators ops = assemble_weighted(m, *shear, t);
    auto u = [](const Vec3& x) { return Vec3(x[2], 1.0 + x[0] * x[0], -x[1]); };
    FEField f{FieldKind::Face, interpolate_face(m, *shear, t, u)};
    const double transported = surface_flux(f, 1, true, m, ops);
    // direct flux through the moved cut surface
    double direct = 0.0;
    for (const auto& cf : m.cut_facets) {
        std::array<Vec3, 3> x;
        for (int i = 0; i < 3; ++i) x[i] = frame_at_ref(*shear, m.vertices[cf.v[i]], t).x;
        Vec3 n = 0.5 * (x[1] - x[0]).cross(x[2] - x[0]);
        const Vec3 nref = (m.vertices[cf.v[1]] - m.vertices[cf.v[0]]).cross(m.vertices[cf.v[2]] - m.vertices[cf.v[0]]);
        if (nref.dot(cf.normal) < 0) n = -n;
        // u is quadratic: edge-midpoint rule is exact
        Vec3 avg = (u(0.5 * (x[0] + x[1])) + u(0.5 * (x[1] + x[2])) + u(0.5 * (x[0] + x[2]))) / 3.0;
        direct += avg.dot(n);
    }
    CHECK(transported == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("decomposition constant estimates") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 6);
    IdentityMotion id;
    MotionPtr dil = make_dilation(1.1, 0.0, 1.0);
    const double c_id = estimate_C_omega(m, id, 0.0, 8);
    const double c_dil = estimate_C_omega(m, *dil, 0.0, 8);
    CHECK(std::isfinite(c_id));
    CHECK(c_id > 0.0);
    CHECK(std::abs(c_dil - c_id) <= 0.25 * c_id);
    CHECK(estimate_C_omega(m, id, 0.0, 16) >= c_id);
    CHECK_THROWS_AS(estimate_C_omega(m, id, 0.0, 4), BadParameters);

    Setup s(m, make_identity());
    CHECK(c_omega_ratio(s.basis.eta[0], s.basis, s.cuts, s.m, s.ops) <= 1e-6);
}
