#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mdhw/errors.hpp"
#include "mdhw/mesh.hpp"

using namespace mdhw;

namespace {

double boundary_area(const ReferenceMesh& m, int label) {
    double a = 0.0;
    for (int f : m.boundary_faces)
        if (m.face_boundary_label[f] == label) a += m.face_area_vector(f).norm();
    return a;
}

double total_volume(const ReferenceMesh& m) {
    double v = 0.0;
    for (double x : m.tet_volume) v += x;
    return v;
}

}  // namespace

TEST_CASE("annulus mesh has two labels and approximates the sphere areas") {
    const double pi = std::acos(-1.0);
    const double exact = 4 * pi * (4.0 + 1.0);
    for (auto [res, tol] : {std::pair{8, 0.05}, std::pair{16, 0.015}}) {
        ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, res);
        CHECK(m.num_boundary_labels() == 2);
        CHECK(m.num_cuts() == 0);
        const double area = boundary_area(m, 0) + boundary_area(m, 1);
        CHECK(std::abs(area - exact) / exact < tol);
        CHECK(boundary_area(m, 0) > boundary_area(m, 1));
        CHECK(m.quality().min_volume > 0.0);
        const double vol = 4.0 / 3.0 * pi * 7.0;
        CHECK(std::abs(total_volume(m) - vol) / vol < 2 * tol);
    }
}

TEST_CASE("annulus counts at resolution 16") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 16);
    CHECK(m.nv() == 26146);
    CHECK(m.nt() == 147456);
}

TEST_CASE("annulus topology is a shell") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 8);
    TopologyReport r = validate_topology(m);
    CHECK(r.b0 == 1);
    CHECK(r.b1 == 0);
    CHECK(r.b2 == 1);
    CHECK(r.boundary_components == 2);
    CHECK(r.valid);
}

TEST_CASE("invalid annulus radii") {
    CHECK_THROWS_AS(generate_annulus_mesh(1.0, 2.0, 8), InvalidRadii);
    CHECK_THROWS_AS(generate_annulus_mesh(1.0, 1.0, 8), InvalidRadii);
    CHECK_THROWS_AS(generate_annulus_mesh(2.0, -1.0, 8), InvalidRadii);
}

TEST_CASE("solid torus has one cut and a valid cut domain") {
    ReferenceMesh m = generate_solid_torus_mesh(2.0, 0.5, 8);
    CHECK(m.num_boundary_labels() == 1);
    CHECK(m.num_cuts() == 1);
    TopologyReport r = validate_topology(m);
    CHECK(r.b0 == 1);
    CHECK(r.b1 == 1);
    CHECK(r.b2 == 0);
    CHECK(r.cut_b0 == 1);
    CHECK(r.cut_b1 == 0);
    CHECK(r.cuts_interior);
    CHECK_MESSAGE(r.valid, r.message);
    const double pi = std::acos(-1.0);
    const double vol = 2 * pi * pi * 2.0 * 0.25;
    CHECK(std::abs(total_volume(m) - vol) / vol < 0.05);
    CHECK(m.quality().min_volume > 0.0);
}

TEST_CASE("invalid torus radii") {
    CHECK_THROWS_AS(generate_solid_torus_mesh(0.5, 2.0, 8), InvalidRadii);
}

TEST_CASE("removing the cut leaves a non simply connected domain") {
    ReferenceMesh m = generate_solid_torus_mesh(2.0, 0.5, 6);
    m.cut_facets.clear();
    m.build_topology();
    TopologyReport r = validate_topology(m);
    CHECK(r.b1 == 1);
    CHECK(r.cut_b1 == 1);
    CHECK_FALSE(r.valid);
}

TEST_CASE("ball is contractible") {
    ReferenceMesh m = generate_ball_mesh(1.0, 6);
    TopologyReport r = validate_topology(m);
    CHECK(r.b1 == 0);
    CHECK(r.b2 == 0);
    CHECK(r.euler == 1);
    CHECK(r.valid);
}

TEST_CASE("face orientation signs are consistent") {
    ReferenceMesh m = generate_annulus_mesh(2.0, 1.0, 4);
    // each interior face is outward for exactly one of its cells
    for (int f = 0; f < m.nf(); ++f) {
        if (m.face_cells[f][1] < 0) continue;
        int s = 0;
        for (int c : m.face_cells[f])
            for (int i = 0; i < 4; ++i)
                if (m.tet_faces[c][i] == f) s += m.tet_face_sign[c][i];
        REQUIRE(s == 0);
    }
    // divergence theorem on every cell
    for (int t = 0; t < m.nt(); ++t) {
        Vec3 sum = Vec3::Zero();
        for (int i = 0; i < 4; ++i) sum += m.tet_face_sign[t][i] * m.face_area_vector(m.tet_faces[t][i]);
        REQUIRE(sum.norm() < 1e-12);
    }
}

TEST_CASE("mesh io round trip keeps labels and cuts") {
    ReferenceMesh m = generate_solid_torus_mesh(2.0, 0.5, 4);
    std::stringstream ss;
    write_mesh(ss, m);
    ReferenceMesh r = read_mesh(ss);
    CHECK(r.nv() == m.nv());
    CHECK(r.nt() == m.nt());
    CHECK(r.nf() == m.nf());
    CHECK(r.num_cuts() == 1);
    CHECK(r.face_cut_sign == m.face_cut_sign);
    CHECK(r.face_boundary_label == m.face_boundary_label);
    CHECK((r.vertices[5] - m.vertices[5]).norm() < 1e-15);
}

TEST_CASE("malformed mesh input") {
    std::stringstream bad("3\n0 0 0\n1 0 0\n");
    CHECK_THROWS_AS(read_mesh(bad), InvalidMesh);
    std::stringstream flat("4\n0 0 0\n1 0 0\n0 1 0\n1 1 0\n1\n0 1 2 3\n0\n");
    CHECK_THROWS_AS(read_mesh(flat), InvalidMesh);
}
