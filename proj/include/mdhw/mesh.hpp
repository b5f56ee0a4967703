/// @file mesh.hpp
/// @brief Tetrahedral reference meshes with labeled boundaries and cut surfaces.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace mdhw {

using Vec3 = Eigen::Vector3d;

struct BoundaryFacet {
    std::array<int, 3> v;
    int label;  // Gamma_k, k = 0..K
};

struct CutFacet {
    std::array<int, 3> v;
    int label;    // Sigma_l, l = 1..L
    Vec3 normal;  // orientation nu_l
};

struct MeshQuality {
    double min_volume = 0.0;
    double max_volume = 0.0;
    double h_max = 0.0;     // longest edge
    double h_min = 0.0;     // shortest edge
    double max_aspect = 0.0;  // longest edge / inradius
};

/// Reference mesh. Geometric data is set by generators or import; topology()
/// derives edges, faces and incidences and must be called before use.
class ReferenceMesh {
public:
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> tets;  // positively oriented
    std::vector<BoundaryFacet> boundary_facets;
    std::vector<CutFacet> cut_facets;

    // ---- derived topology ----
    std::vector<std::array<int, 2>> edges;  // sorted vertex pairs
    std::vector<std::array<int, 3>> faces;  // sorted vertex triples
    std::vector<std::array<int, 6>> tet_edges;  // local (01)(02)(03)(12)(13)(23)
    std::vector<std::array<int, 4>> tet_faces;  // face opposite local vertex i
    std::vector<std::array<int, 4>> tet_face_sign;  // +1 if face orientation points outward
    std::vector<std::array<int, 2>> face_cells;  // -1 when absent
    std::vector<int> face_boundary_label;  // -1 for interior faces
    std::vector<int> face_cut_label;       // 0 when not on a cut
    std::vector<int> face_cut_sign;        // +1 if face orientation agrees with nu_l
    std::vector<int> vertex_label;         // boundary label, -1 interior
    std::vector<double> tet_volume;
    std::vector<int> boundary_faces;  // face ids on the boundary, any label

    int num_boundary_labels() const { return nlabels_; }  // K + 1
    int num_inner_boundaries() const { return nlabels_ - 1; }  // K
    int num_cuts() const { return ncuts_; }  // L
    bool has_topology() const { return !faces.empty(); }

    int nv() const { return static_cast<int>(vertices.size()); }
    int ne() const { return static_cast<int>(edges.size()); }
    int nf() const { return static_cast<int>(faces.size()); }
    int nt() const { return static_cast<int>(tets.size()); }

    /// Builds derived topology; fixes tet orientation; throws InvalidMesh.
    void build_topology();

    MeshQuality quality() const;

    /// Outward-oriented area vector of face f with its orientation normal.
    Vec3 face_area_vector(int f) const;
    Vec3 face_centroid(int f) const;
    Vec3 tet_centroid(int t) const;

    /// Gradients of barycentric coordinates of tet t (rows 0..3).
    Eigen::Matrix<double, 4, 3> bary_gradients(int t) const;

private:
    int nlabels_ = 0;
    int ncuts_ = 0;
};

struct TopologyReport {
    int b0 = 0, b1 = 0, b2 = 0;
    int euler = 0;
    int boundary_components = 0;
    int cut_b0 = 0, cut_b1 = 0, cut_b2 = 0;
    int cut_boundary_components = 0;
    bool labels_connected = true;
    bool labels_disjoint = true;
    bool cuts_interior = true;
    bool valid = false;
    std::string message;
};

/// Betti numbers of the mesh and of the mesh cut along all Sigma_l, by Euler
/// characteristic and boundary-component counting. valid requires
/// b2 = K, b1 = L, and a connected, simply connected cut domain.
TopologyReport validate_topology(const ReferenceMesh& m);

ReferenceMesh generate_annulus_mesh(double R0, double R1, int resolution);
ReferenceMesh generate_solid_torus_mesh(double major_R, double minor_r, int resolution);
ReferenceMesh generate_ball_mesh(double radius, int resolution);

/// Copy with vertices moved by f (topology is kept).
template <class F>
ReferenceMesh mapped_mesh(const ReferenceMesh& m, F&& f) {
    ReferenceMesh r = m;
    for (auto& v : r.vertices) v = f(v);
    for (auto& c : r.cut_facets) {
        const Vec3 n = (r.vertices[c.v[1]] - r.vertices[c.v[0]]).cross(r.vertices[c.v[2]] - r.vertices[c.v[0]]);
        // keep the orientation consistent with the facet winding
        const Vec3 n0 = (m.vertices[c.v[1]] - m.vertices[c.v[0]]).cross(m.vertices[c.v[2]] - m.vertices[c.v[0]]);
        c.normal = (n0.dot(c.normal) >= 0 ? 1.0 : -1.0) * n.normalized();
    }
    r.build_topology();
    return r;
}

/// Plain-text format: vertex count, "x y z" lines, tet count, "i j k l"
/// lines, facet count, "i j k label" lines. Cut facets carry label -l and
/// their winding gives the orientation normal.
void write_mesh(std::ostream& os, const ReferenceMesh& m);
ReferenceMesh read_mesh(std::istream& is);

}  // namespace mdhw
