#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mdhw/cutoff.hpp"
#include "mdhw/errors.hpp"
#include "mdhw/rng.hpp"

using namespace mdhw;

namespace {

double max_boundary_edge(const ReferenceMesh& m) {
    double h = 0.0;
    for (const auto& e : m.edges)
        if (m.vertex_label[e[0]] >= 0 && m.vertex_label[e[1]] >= 0)
            h = std::max(h, (m.vertices[e[0]] - m.vertices[e[1]]).norm());
    return h;
}

}  // namespace

TEST_CASE("distance to the annulus boundary") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 8);
    const FEField d = distance_to_boundary(m);
    const double h = max_boundary_edge(m);
    for (int v = 0; v < m.nv(); ++v) {
        const double r = m.vertices[v].norm();
        if (m.vertex_label[v] >= 0) {
            CHECK(d.values[v] == 0.0);
            continue;
        }
        CHECK(d.values[v] >= 0.0);
        CHECK(std::abs(d.values[v] - std::min(2.0 - r, r - 1.0)) <= h * h);
    }
    CounterRng rng(3);
    for (int k = 0; k < 2000; ++k) {
        const int a = static_cast<int>(rng.uniform() * m.nv()), b = static_cast<int>(rng.uniform() * m.nv());
        CHECK(std::abs(d.values[a] - d.values[b]) <= (m.vertices[a] - m.vertices[b]).norm() + 1e-14);
    }
}

TEST_CASE("distance queries agree with brute force") {
    ReferenceMesh m = generate_solid_torus_mesh(2.0, 0.5, 6);
    BoundaryDistance dist(m);
    CounterRng rng(11);
    for (int k = 0; k < 200; ++k) {
        const Vec3 p(rng.uniform(-2.6, 2.6), rng.uniform(-2.6, 2.6), rng.uniform(-0.6, 0.6));
        double brute = 1e300;
        for (int f : m.boundary_faces) {
            // dense barycentric sampling is an upper bound; the exact query must not exceed it
            const auto& v = m.faces[f];
            for (double a = 0; a <= 1.0; a += 0.25)
                for (double b = 0; a + b <= 1.0; b += 0.25)
                    brute = std::min(brute, (p - (a * m.vertices[v[0]] + b * m.vertices[v[1]] +
                                                  (1 - a - b) * m.vertices[v[2]]))
                                                .norm());
        }
        Vec3 g;
        const double d = dist(p, &g);
        CHECK(d <= brute + 1e-12);
        CHECK(d >= brute - 0.3);
        CHECK(g.norm() == doctest::Approx(1.0));
    }
}

TEST_CASE("xi profile branches") {
    CHECK(xi_profile(std::exp(-4.0) / 2, 0.5) == 1.0);
    CHECK(xi_profile(std::exp(-3.0), 0.5) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(xi_profile(std::exp(-1.0), 0.5) == 0.0);
    // continuous at both kinks
    for (double rho : {0.5, 0.25, 0.125}) {
        const double k1 = std::exp(-2.0 / rho), k2 = std::exp(-1.0 / rho);
        CHECK(xi_profile(k1 * (1 + 1e-12), rho) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(xi_profile(k2 * (1 - 1e-12), rho) == doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("tabulated profile matches direct quadrature") {
    for (double rho : {0.5, 0.25, 0.125}) {
        const double delta = rho / 4;
        CutoffFunction Th(rho, 0.125 * std::exp(-2.0 / delta));
        const double k1 = std::exp(-2.0 / rho), k2 = std::exp(-1.0 / rho);
        CounterRng rng(7);
        for (int i = 0; i < 32; ++i) {
            const double z = std::exp(rng.uniform(std::log(0.5 * k1), std::log(2.0 * k2)));
            CHECK(std::abs(Th.value(z) - Th.value_direct(z)) <= 1e-8);
            CHECK(std::abs(Th.derivative(z) - Th.derivative_direct(z)) * z <= 1e-8);
        }
        // constants are reproduced exactly, and the 1-D gradient bound holds on a dense grid
        CHECK(Th.value_direct(0.25 * k1) == doctest::Approx(1.0).epsilon(1e-15));
        double worst = 0.0, prev = 1.0;
        bool monotone = true;
        for (int i = 0; i <= 20000; ++i) {
            const double z = 0.5 * k1 * std::pow(4.0 * k2 / k1, i / 20000.0);
            worst = std::max(worst, std::abs(Th.derivative(z)) * z / (2.0 * rho));
            const double v = Th.value(z);
            if (v > prev + 1e-15) monotone = false;
            prev = v;
        }
        CHECK(worst <= 1.0);
        CHECK(monotone);
    }
}

TEST_CASE("cut-off plateau, support and gradient bound") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 8);
    for (double rho : {0.5, 0.25, 0.125}) {
        CutoffProfile c = build_cutoff(m, rho, rho / 4);
        const VectorXd& d = c.distance.values;
        const VectorXd& th = c.theta.values;
        for (int v = 0; v < m.nv(); ++v) {
            if (d[v] < 0.5 * std::exp(-2.0 / rho)) CHECK(th[v] == 1.0);
            if (d[v] > 2.0 * std::exp(-1.0 / rho)) CHECK(th[v] == 0.0);
            CHECK(th[v] >= 0.0);
            CHECK(th[v] <= 1.0);
        }
        CHECK(gradient_bound_ratio(c) <= 1.0 + 1e-6);
        std::vector<int> order(m.nv());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
        bool monotone = true;
        for (size_t i = 1; i < order.size(); ++i)
            if (th[order[i]] > th[order[i - 1]]) monotone = false;
        CHECK(monotone);
    }
}

TEST_CASE("cut-off parameter checks") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 4);
    CHECK_THROWS_AS(build_cutoff(m, 0.3, 0.2), BadParameters);
    CHECK_THROWS_AS(build_cutoff(m, 1.5, 0.1), BadParameters);
    CHECK_THROWS_AS(build_cutoff(m, 0.0, 0.0), BadParameters);
    CutoffOptions o;
    o.lambda = std::exp(-2.0 / 0.1);
    CHECK_THROWS_AS(build_cutoff(m, 0.3, 0.1, o), BadParameters);
    o = {};
    o.d_star = 0.3;  // rho_star = -1 / log 0.3 = 0.83
    CHECK_THROWS_AS(build_cutoff(m, 0.9, 0.1, o), BadParameters);
    CHECK_NOTHROW(build_cutoff(m, 0.8, 0.1, o));
}

TEST_CASE("Leray pairing") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 6);
    MotionPtr pul = make_pulsating_annulus(2.0, 1.0, 0.05, 1.0);
    const double t = 0.3;
    auto ufn = [](const Vec3& x) {
        const double r = x.norm();
        const double s = (r - 1.0) * (2.0 - r);
        return Vec3(s * Vec3(-x[1], x[0], 0.3 * x[2]));
    };
    FEField u{FieldKind::NodalVector, interpolate_nodal_vector(m, *pul, t, ufn)};
    for (int v = 0; v < m.nv(); ++v)
        if (m.vertex_label[v] >= 0) u.values.segment<3>(3 * v).setZero();
    FEField w{FieldKind::NodalVector,
              interpolate_nodal_vector(m, *pul, t, [](const Vec3& x) { return Vec3(1.0 + x[1], x[2], -x[0]); })};

    CutoffProfile c05 = build_cutoff(m, 0.5, 0.125);
    SUBCASE("zero field") {
        FEField z{FieldKind::NodalVector, VectorXd::Zero(3 * m.nv())};
        CHECK(leray_pairing(m, z, c05, w, *pul, t).value == 0.0);
    }
    SUBCASE("vanishing cut-off") {
        CutoffProfile zero = c05;
        std::fill(zero.qp_theta.begin(), zero.qp_theta.end(), 0.0);
        for (auto& g : zero.qp_grad) g.setZero();
        CHECK(leray_pairing(m, u, zero, w, *pul, t).value == 0.0);
    }
    SUBCASE("ratio decreases with rho") {
        double prev = 1e300;
        for (double rho : {0.5, 0.25, 0.125}) {
            const LerayPairing p = leray_pairing(m, u, build_cutoff(m, rho, rho / 4), w, *pul, t);
            CHECK(p.grad_u_sq > 0.0);
            CHECK(std::abs(p.ratio) <= prev);
            prev = std::abs(p.ratio);
        }
        CHECK(prev < std::abs(leray_pairing(m, u, c05, w, *pul, t).ratio));
    }
    SUBCASE("Hardy ratio is finite") {
        const double h = hardy_ratio(m, u, c05);
        CHECK(std::isfinite(h));
        CHECK(h > 0.0);
        MESSAGE("Hardy ratio |u/d| / |grad u| = " << h);
    }
}

TEST_CASE("rho selection by bisection") {
    auto ratio = [](double rho) { return rho * rho; };
    const double rho = select_rho(ratio, 0.01, 0.5);
    CHECK(rho == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(select_rho(ratio, 1.0, 0.5) == 0.5);
    CHECK(select_rho([](double) { return 1.0; }, 0.5, 0.5) == 0.0);
}
