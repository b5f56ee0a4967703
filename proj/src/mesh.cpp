/// @file mesh.cpp
/// @brief Mesh generators, topology, validation and plain-text IO.
#include "mdhw/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mdhw/errors.hpp"

namespace mdhw {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct UnionFind {
    std::vector<int> p;
    explicit UnionFind(int n) : p(n) { std::iota(p.begin(), p.end(), 0); }
    int find(int a) {
        while (p[a] != a) a = p[a] = p[p[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) p[std::max(a, b)] = std::min(a, b);
    }
    int count(const std::vector<int>& members) {
        std::vector<int> roots;
        for (int m : members) roots.push_back(find(m));
        std::sort(roots.begin(), roots.end());
        return static_cast<int>(std::unique(roots.begin(), roots.end()) - roots.begin());
    }
};

std::array<int, 3> sorted3(std::array<int, 3> a) {
    std::sort(a.begin(), a.end());
    return a;
}

double orient(const std::vector<Vec3>& X, const std::array<int, 4>& t) {
    return (X[t[1]] - X[t[0]]).dot((X[t[2]] - X[t[0]]).cross(X[t[3]] - X[t[0]]));
}

// Split the prism (b0 b1 b2 | t0 t1 t2), ti above bi, into 3 tets so that
// every quad side uses the diagonal through its smallest vertex id.
void split_prism(const std::array<int, 6>& pv, std::vector<std::array<int, 4>>& out) {
    // local layout: 0 1 2 bottom, 3 4 5 top
    std::array<int, 6> p = pv;
    int imin = static_cast<int>(std::min_element(p.begin(), p.end()) - p.begin());
    if (imin >= 3) {
        std::swap(p[0], p[3]);
        std::swap(p[1], p[4]);
        std::swap(p[2], p[5]);
        imin -= 3;
    }
    while (imin != 0) {
        std::array<int, 6> q = {p[1], p[2], p[0], p[4], p[5], p[3]};
        p = q;
        imin = (imin + 2) % 3;
    }
    if (std::min(p[1], p[5]) < std::min(p[2], p[4])) {
        out.push_back({p[0], p[1], p[2], p[5]});
        out.push_back({p[0], p[1], p[5], p[4]});
        out.push_back({p[0], p[4], p[5], p[3]});
    } else {
        out.push_back({p[0], p[1], p[2], p[4]});
        out.push_back({p[0], p[4], p[2], p[5]});
        out.push_back({p[0], p[4], p[5], p[3]});
    }
}

// Assign boundary facets from single-cell faces via a labeling rule on the
// facet centroid. Requires topology to be built once without facets.
void label_boundary(ReferenceMesh& m, const std::function<int(const Vec3&)>& label) {
    std::map<std::array<int, 3>, int> count;
    for (const auto& t : m.tets)
        for (int i = 0; i < 4; ++i) {
            std::array<int, 3> f{};
            int k = 0;
            for (int j = 0; j < 4; ++j)
                if (j != i) f[k++] = t[j];
            count[sorted3(f)]++;
        }
    m.boundary_facets.clear();
    for (auto& [f, c] : count)
        if (c == 1) {
            Vec3 cen = (m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0;
            m.boundary_facets.push_back({f, label(cen)});
        }
}

}  // namespace

// ============================================================================
// Topology
// ============================================================================

void ReferenceMesh::build_topology() {
    const int T = nt();
    for (auto& t : tets) {
        for (int v : t)
            if (v < 0 || v >= nv()) throw InvalidMesh("tet vertex index out of range");
        const double o = orient(vertices, t);
        if (o == 0.0) throw InvalidMesh("degenerate tetrahedron");
        if (o < 0) std::swap(t[2], t[3]);
    }

    // edges
    static const int LE[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    std::vector<std::pair<std::array<int, 2>, int>> elist;
    elist.reserve(6 * T);
    for (int t = 0; t < T; ++t)
        for (int e = 0; e < 6; ++e) {
            int a = tets[t][LE[e][0]], b = tets[t][LE[e][1]];
            elist.push_back({{std::min(a, b), std::max(a, b)}, 6 * t + e});
        }
    std::sort(elist.begin(), elist.end());
    edges.clear();
    tet_edges.assign(T, {});
    for (size_t i = 0; i < elist.size(); ++i) {
        if (i == 0 || elist[i].first != elist[i - 1].first) edges.push_back(elist[i].first);
        tet_edges[elist[i].second / 6][elist[i].second % 6] = ne() - 1;
    }

    // faces
    std::vector<std::pair<std::array<int, 3>, int>> flist;
    flist.reserve(4 * T);
    for (int t = 0; t < T; ++t)
        for (int i = 0; i < 4; ++i) {
            std::array<int, 3> f{};
            int k = 0;
            for (int j = 0; j < 4; ++j)
                if (j != i) f[k++] = tets[t][j];
            flist.push_back({sorted3(f), 4 * t + i});
        }
    std::sort(flist.begin(), flist.end());
    faces.clear();
    tet_faces.assign(T, {});
    face_cells.clear();
    for (size_t i = 0; i < flist.size(); ++i) {
        if (i == 0 || flist[i].first != flist[i - 1].first) {
            faces.push_back(flist[i].first);
            face_cells.push_back({-1, -1});
        }
        const int t = flist[i].second / 4, li = flist[i].second % 4;
        tet_faces[t][li] = nf() - 1;
        auto& fc = face_cells.back();
        if (fc[0] < 0)
            fc[0] = t;
        else if (fc[1] < 0)
            fc[1] = t;
        else
            throw InvalidMesh("face shared by more than two tets");
    }

    tet_volume.resize(T);
    tet_face_sign.assign(T, {});
    for (int t = 0; t < T; ++t) {
        tet_volume[t] = orient(vertices, tets[t]) / 6.0;
        for (int i = 0; i < 4; ++i) {
            const int f = tet_faces[t][i];
            const Vec3 n = face_area_vector(f);
            const Vec3 d = face_centroid(f) - vertices[tets[t][i]];
            tet_face_sign[t][i] = n.dot(d) > 0 ? 1 : -1;
        }
    }

    auto find_face = [&](const std::array<int, 3>& v) {
        auto key = sorted3(v);
        auto it = std::lower_bound(faces.begin(), faces.end(), key);
        if (it == faces.end() || *it != key) throw InvalidMesh("facet is not a mesh face");
        return static_cast<int>(it - faces.begin());
    };

    face_boundary_label.assign(nf(), -1);
    vertex_label.assign(nv(), -1);
    nlabels_ = 0;
    boundary_faces.clear();
    for (const auto& bf : boundary_facets) {
        const int f = find_face(bf.v);
        if (face_cells[f][1] >= 0) throw InvalidMesh("boundary facet has two cells");
        if (bf.label < 0) throw InvalidMesh("negative boundary label");
        face_boundary_label[f] = bf.label;
        for (int v : bf.v) vertex_label[v] = bf.label;
        nlabels_ = std::max(nlabels_, bf.label + 1);
        boundary_faces.push_back(f);
    }
    std::sort(boundary_faces.begin(), boundary_faces.end());
    int exterior = 0;
    for (int f = 0; f < nf(); ++f)
        if (face_cells[f][1] < 0) ++exterior;
    if (exterior != static_cast<int>(boundary_facets.size()))
        throw InvalidMesh("every exterior face needs exactly one boundary label");

    face_cut_label.assign(nf(), 0);
    face_cut_sign.assign(nf(), 0);
    ncuts_ = 0;
    for (const auto& cf : cut_facets) {
        const int f = find_face(cf.v);
        if (cf.label < 1) throw InvalidMesh("cut labels start at 1");
        face_cut_label[f] = cf.label;
        face_cut_sign[f] = face_area_vector(f).dot(cf.normal) > 0 ? 1 : -1;
        ncuts_ = std::max(ncuts_, cf.label);
    }
}

Vec3 ReferenceMesh::face_area_vector(int f) const {
    const auto& v = faces[f];
    return 0.5 * (vertices[v[1]] - vertices[v[0]]).cross(vertices[v[2]] - vertices[v[0]]);
}

Vec3 ReferenceMesh::face_centroid(int f) const {
    const auto& v = faces[f];
    return (vertices[v[0]] + vertices[v[1]] + vertices[v[2]]) / 3.0;
}

Vec3 ReferenceMesh::tet_centroid(int t) const {
    const auto& v = tets[t];
    return 0.25 * (vertices[v[0]] + vertices[v[1]] + vertices[v[2]] + vertices[v[3]]);
}

Eigen::Matrix<double, 4, 3> ReferenceMesh::bary_gradients(int t) const {
    const auto& v = tets[t];
    Eigen::Matrix3d E;
    E.col(0) = vertices[v[1]] - vertices[v[0]];
    E.col(1) = vertices[v[2]] - vertices[v[0]];
    E.col(2) = vertices[v[3]] - vertices[v[0]];
    const Eigen::Matrix3d Ei = E.inverse();  // rows: grad lambda_1..3
    Eigen::Matrix<double, 4, 3> G;
    G.row(1) = Ei.row(0);
    G.row(2) = Ei.row(1);
    G.row(3) = Ei.row(2);
    G.row(0) = -(G.row(1) + G.row(2) + G.row(3));
    return G;
}

MeshQuality ReferenceMesh::quality() const {
    MeshQuality q;
    q.min_volume = 1e300;
    q.h_min = 1e300;
    for (int t = 0; t < nt(); ++t) {
        const double vol = tet_volume[t];
        q.min_volume = std::min(q.min_volume, vol);
        q.max_volume = std::max(q.max_volume, vol);
        double area = 0.0, hmax = 0.0;
        for (int i = 0; i < 4; ++i) area += face_area_vector(tet_faces[t][i]).norm();
        for (int e = 0; e < 6; ++e) {
            const auto& ed = edges[tet_edges[t][e]];
            const double h = (vertices[ed[0]] - vertices[ed[1]]).norm();
            hmax = std::max(hmax, h);
            q.h_min = std::min(q.h_min, h);
        }
        q.h_max = std::max(q.h_max, hmax);
        q.max_aspect = std::max(q.max_aspect, hmax / (3.0 * vol / area));
    }
    return q;
}

// ============================================================================
// Validation
// ============================================================================

TopologyReport validate_topology(const ReferenceMesh& m) {
    TopologyReport r;
    if (!m.has_topology()) throw InvalidMesh("topology not built");
    const int V = m.nv(), E = m.ne(), F = m.nf(), C = m.nt();
    r.euler = V - E + F - C;

    // edge -> incident boundary faces, for surface connectivity
    std::map<std::array<int, 2>, std::vector<int>> edge_bfaces;
    for (int f : m.boundary_faces) {
        const auto& v = m.faces[f];
        edge_bfaces[{v[0], v[1]}].push_back(f);
        edge_bfaces[{v[1], v[2]}].push_back(f);
        edge_bfaces[{v[0], v[2]}].push_back(f);
    }

    // dual graph connectivity (optionally blocked at cut faces)
    auto components = [&](bool block_cuts) {
        UnionFind uf(C);
        for (int f = 0; f < F; ++f) {
            const auto& fc = m.face_cells[f];
            if (fc[1] < 0) continue;
            if (block_cuts && m.face_cut_label[f] != 0) continue;
            uf.unite(fc[0], fc[1]);
        }
        std::vector<int> all(C);
        std::iota(all.begin(), all.end(), 0);
        return uf.count(all);
    };
    r.b0 = components(false);
    r.cut_b0 = components(true);

    // boundary components of the uncut domain
    {
        UnionFind uf(F);
        for (auto& [e, fs] : edge_bfaces)
            for (size_t i = 1; i < fs.size(); ++i) uf.unite(fs[0], fs[i]);
        r.boundary_components = uf.count(m.boundary_faces);
        // every label forms one connected component; labels do not touch
        std::map<int, std::vector<int>> by_label;
        for (int f : m.boundary_faces) by_label[m.face_boundary_label[f]].push_back(f);
        for (auto& [lab, fs] : by_label) {
            UnionFind ul(F);
            for (auto& [e, list] : edge_bfaces) {
                std::vector<int> same;
                for (int f : list)
                    if (m.face_boundary_label[f] == lab) same.push_back(f);
                for (size_t i = 1; i < same.size(); ++i) ul.unite(same[0], same[i]);
            }
            if (ul.count(fs) != 1) r.labels_connected = false;
        }
        std::vector<int> vlab(V, -1);
        for (int f : m.boundary_faces)
            for (int v : m.faces[f]) {
                const int lab = m.face_boundary_label[f];
                if (vlab[v] >= 0 && vlab[v] != lab) r.labels_disjoint = false;
                vlab[v] = lab;
            }
        if (static_cast<int>(by_label.size()) != m.num_boundary_labels()) r.labels_connected = false;
    }

    // cut faces must be interior
    std::vector<int> cut_faces;
    for (int f = 0; f < F; ++f)
        if (m.face_cut_label[f] != 0) {
            cut_faces.push_back(f);
            if (m.face_cells[f][1] < 0) r.cuts_interior = false;
        }

    // Euler characteristic of the cut surfaces
    int chi_sigma = 0;
    {
        std::vector<std::array<int, 2>> se;
        std::vector<int> sv;
        for (int f : cut_faces) {
            const auto& v = m.faces[f];
            se.push_back({v[0], v[1]});
            se.push_back({v[1], v[2]});
            se.push_back({v[0], v[2]});
            sv.insert(sv.end(), v.begin(), v.end());
        }
        std::sort(se.begin(), se.end());
        se.erase(std::unique(se.begin(), se.end()), se.end());
        std::sort(sv.begin(), sv.end());
        sv.erase(std::unique(sv.begin(), sv.end()), sv.end());
        chi_sigma = static_cast<int>(sv.size()) - static_cast<int>(se.size()) +
                    static_cast<int>(cut_faces.size());
    }

    // boundary components of the cut domain: sheets are (face, cell) pairs on
    // the boundary or on either side of a cut; adjacency found by walking the
    // fan of cells around each sheet edge.
    {
        std::vector<std::pair<int, int>> sheets;
        std::map<std::pair<int, int>, int> sheet_id;
        auto is_sheet_face = [&](int f) {
            return m.face_cells[f][1] < 0 || m.face_cut_label[f] != 0;
        };
        for (int f = 0; f < F; ++f) {
            if (!is_sheet_face(f)) continue;
            for (int c : m.face_cells[f])
                if (c >= 0) {
                    sheet_id[{f, c}] = static_cast<int>(sheets.size());
                    sheets.push_back({f, c});
                }
        }
        UnionFind uf(static_cast<int>(sheets.size()));
        auto other_face_with_edge = [&](int c, int f, int a, int b) {
            for (int g : m.tet_faces[c]) {
                if (g == f) continue;
                const auto& v = m.faces[g];
                const bool ha = v[0] == a || v[1] == a || v[2] == a;
                const bool hb = v[0] == b || v[1] == b || v[2] == b;
                if (ha && hb) return g;
            }
            return -1;
        };
        for (size_t s = 0; s < sheets.size(); ++s) {
            const auto [f0, c0] = sheets[s];
            const auto& v = m.faces[f0];
            const int pairs[3][2] = {{v[0], v[1]}, {v[1], v[2]}, {v[0], v[2]}};
            for (const auto& pr : pairs) {
                int f = f0, c = c0;
                for (int guard = 0; guard < 10000; ++guard) {
                    const int g = other_face_with_edge(c, f, pr[0], pr[1]);
                    if (g < 0) break;
                    if (is_sheet_face(g)) {
                        uf.unite(static_cast<int>(s), sheet_id.at({g, c}));
                        break;
                    }
                    const auto& gc = m.face_cells[g];
                    c = (gc[0] == c) ? gc[1] : gc[0];
                    f = g;
                }
            }
        }
        std::vector<int> all(sheets.size());
        std::iota(all.begin(), all.end(), 0);
        r.cut_boundary_components = uf.count(all);
    }

    r.b2 = r.boundary_components - r.b0;
    r.b1 = r.b0 + r.b2 - r.euler;
    const int chi_cut = r.euler + chi_sigma;
    r.cut_b2 = r.cut_boundary_components - r.cut_b0;
    r.cut_b1 = r.cut_b0 + r.cut_b2 - chi_cut;

    std::ostringstream msg;
    r.valid = true;
    auto fail = [&](const std::string& s) {
        r.valid = false;
        msg << s << "; ";
    };
    if (r.b0 != 1) fail("domain is not connected");
    if (!r.labels_connected) fail("a boundary label is not one connected component");
    if (!r.labels_disjoint) fail("boundary components touch");
    if (!r.cuts_interior) fail("cut facet on the boundary");
    if (r.b2 != m.num_inner_boundaries()) fail("b2 differs from the number of inner boundaries");
    if (r.b1 != m.num_cuts()) fail("b1 differs from the number of cut surfaces");
    if (r.cut_b0 != 1) fail("cuts disconnect the domain");
    if (r.cut_b1 != 0) fail("cut domain is not simply connected");
    r.message = msg.str();
    return r;
}

// ============================================================================
// Generators
// ============================================================================

ReferenceMesh generate_annulus_mesh(double R0, double R1, int resolution) {
    if (!(R1 > 0.0) || !(R1 < R0)) throw InvalidRadii("annulus requires 0 < R1 < R0");
    if (resolution < 4) throw BadParameters("annulus resolution must be >= 4");
    const int n = resolution;
    const int nr = n;  // radial layers; keeps cells close to isotropic near the inner sphere

    // equiangular cubed-sphere surface
    std::vector<Vec3> sp;
    std::map<std::array<long long, 3>, int> key;
    auto add = [&](const Vec3& p) {
        std::array<long long, 3> k{std::llround(p[0] * 1e9), std::llround(p[1] * 1e9),
                                   std::llround(p[2] * 1e9)};
        auto it = key.find(k);
        if (it != key.end()) return it->second;
        key[k] = static_cast<int>(sp.size());
        sp.push_back(p);
        return static_cast<int>(sp.size()) - 1;
    };
    std::vector<std::array<int, 3>> tri;
    for (int fc = 0; fc < 6; ++fc) {
        std::vector<int> id((n + 1) * (n + 1));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                const double a = std::tan(-kPi / 4 + kPi / 2 * i / n);
                const double b = std::tan(-kPi / 4 + kPi / 2 * j / n);
                Vec3 p;
                switch (fc) {
                    case 0: p = Vec3(1, a, b); break;
                    case 1: p = Vec3(-1, a, b); break;
                    case 2: p = Vec3(a, 1, b); break;
                    case 3: p = Vec3(a, -1, b); break;
                    case 4: p = Vec3(a, b, 1); break;
                    default: p = Vec3(a, b, -1); break;
                }
                id[i * (n + 1) + j] = add(p.normalized());
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int a = id[i * (n + 1) + j], b = id[(i + 1) * (n + 1) + j];
                const int c = id[(i + 1) * (n + 1) + j + 1], d = id[i * (n + 1) + j + 1];
                // alternate diagonals for a more isotropic pattern
                if ((i + j) % 2 == 0) {
                    tri.push_back({a, b, c});
                    tri.push_back({a, c, d});
                } else {
                    tri.push_back({a, b, d});
                    tri.push_back({b, c, d});
                }
            }
    }
    const int S = static_cast<int>(sp.size());
    ReferenceMesh m;
    m.vertices.resize(static_cast<size_t>(S) * (nr + 1));
    for (int l = 0; l <= nr; ++l) {
        const double r = R1 + (R0 - R1) * l / nr;
        for (int i = 0; i < S; ++i) m.vertices[l * S + i] = r * sp[i];
    }
    for (int l = 0; l < nr; ++l)
        for (const auto& t : tri)
            split_prism({l * S + t[0], l * S + t[1], l * S + t[2], (l + 1) * S + t[0],
                         (l + 1) * S + t[1], (l + 1) * S + t[2]},
                        m.tets);
    for (const auto& t : tri) {
        m.boundary_facets.push_back({{t[0], t[1], t[2]}, 1});
        m.boundary_facets.push_back({{nr * S + t[0], nr * S + t[1], nr * S + t[2]}, 0});
    }
    m.build_topology();
    return m;
}

ReferenceMesh generate_solid_torus_mesh(double major_R, double minor_r, int resolution) {
    if (!(minor_r > 0.0) || !(minor_r < major_R)) throw InvalidRadii("torus requires 0 < r < R");
    if (resolution < 4) throw BadParameters("torus resolution must be >= 4");
    const int nd = std::max(2, resolution / 2);
    const int nth = 6 * resolution;

    // disk of rings with 6k points on ring k
    std::vector<Eigen::Vector2d> dp{{0.0, 0.0}};
    std::vector<int> ring_start{0};
    for (int k = 1; k <= nd; ++k) {
        ring_start.push_back(static_cast<int>(dp.size()));
        for (int j = 0; j < 6 * k; ++j) {
            const double a = 2 * kPi * j / (6 * k);
            dp.push_back(minor_r * k / nd * Eigen::Vector2d(std::cos(a), std::sin(a)));
        }
    }
    std::vector<std::array<int, 3>> tri;
    for (int k = 1; k <= nd; ++k) {
        const int nin = (k == 1) ? 1 : 6 * (k - 1), nout = 6 * k;
        const int s_in = ring_start[k - 1], s_out = ring_start[k];
        int i = 0, j = 0;
        while (i < (k == 1 ? 0 : nin) || j < nout) {
            const double ao = 2 * kPi * (j + 1) / nout;
            const double ai = (k == 1) ? 1e9 : 2 * kPi * (i + 1) / nin;
            const bool take_outer = (j < nout) && (k == 1 || i >= nin || ao <= ai + 1e-12);
            if (take_outer) {
                tri.push_back({s_in + (k == 1 ? 0 : i % nin), s_out + j, s_out + (j + 1) % nout});
                ++j;
            } else {
                tri.push_back({s_in + i, s_out + j % nout, s_in + (i + 1) % nin});
                ++i;
            }
        }
    }
    const int D = static_cast<int>(dp.size());
    ReferenceMesh m;
    m.vertices.resize(static_cast<size_t>(D) * nth);
    for (int s = 0; s < nth; ++s) {
        const double th = 2 * kPi * s / nth;
        for (int p = 0; p < D; ++p) {
            const double rr = major_R + dp[p][0];
            m.vertices[s * D + p] = Vec3(rr * std::cos(th), rr * std::sin(th), dp[p][1]);
        }
    }
    for (int s = 0; s < nth; ++s) {
        const int s1 = (s + 1) % nth;
        for (const auto& t : tri)
            split_prism({s * D + t[0], s * D + t[1], s * D + t[2], s1 * D + t[0], s1 * D + t[1],
                         s1 * D + t[2]},
                        m.tets);
    }
    for (const auto& t : tri) m.cut_facets.push_back({{t[0], t[1], t[2]}, 1, Vec3(0, 1, 0)});
    label_boundary(m, [](const Vec3&) { return 0; });
    m.build_topology();
    return m;
}

ReferenceMesh generate_ball_mesh(double radius, int resolution) {
    if (!(radius > 0.0)) throw InvalidRadii("ball radius must be positive");
    if (resolution < 2) throw BadParameters("ball resolution must be >= 2");
    const int n = resolution;
    ReferenceMesh m;
    auto vid = [&](int i, int j, int k) { return (i * (n + 1) + j) * (n + 1) + k; };
    m.vertices.resize(static_cast<size_t>(n + 1) * (n + 1) * (n + 1));
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            for (int k = 0; k <= n; ++k) {
                Vec3 p(-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n, -1.0 + 2.0 * k / n);
                const double r2 = p.norm();
                if (r2 > 0) p *= p.lpNorm<Eigen::Infinity>() / r2;
                m.vertices[vid(i, j, k)] = radius * p;
            }
    const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                for (const auto& p : perms) {
                    int c[3] = {i, j, k};
                    std::array<int, 4> t{};
                    t[0] = vid(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        c[p[s]] += 1;
                        t[s + 1] = vid(c[0], c[1], c[2]);
                    }
                    m.tets.push_back(t);
                }
    label_boundary(m, [](const Vec3&) { return 0; });
    m.build_topology();
    return m;
}

// ============================================================================
// IO
// ============================================================================

void write_mesh(std::ostream& os, const ReferenceMesh& m) {
    os.precision(17);
    os << m.nv() << "\n";
    for (const auto& v : m.vertices) os << v[0] << " " << v[1] << " " << v[2] << "\n";
    os << m.nt() << "\n";
    for (const auto& t : m.tets) os << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
    os << m.boundary_facets.size() + m.cut_facets.size() << "\n";
    for (const auto& f : m.boundary_facets)
        os << f.v[0] << " " << f.v[1] << " " << f.v[2] << " " << f.label << "\n";
    for (const auto& f : m.cut_facets) {
        std::array<int, 3> v = f.v;
        const Vec3 n = (m.vertices[v[1]] - m.vertices[v[0]]).cross(m.vertices[v[2]] - m.vertices[v[0]]);
        if (n.dot(f.normal) < 0) std::swap(v[1], v[2]);
        os << v[0] << " " << v[1] << " " << v[2] << " " << -f.label << "\n";
    }
}

ReferenceMesh read_mesh(std::istream& is) {
    ReferenceMesh m;
    long nv = 0, nt = 0, nf = 0;
    if (!(is >> nv) || nv <= 0) throw InvalidMesh("bad vertex count");
    m.vertices.resize(nv);
    for (auto& v : m.vertices)
        if (!(is >> v[0] >> v[1] >> v[2])) throw InvalidMesh("bad vertex line");
    if (!(is >> nt) || nt <= 0) throw InvalidMesh("bad tet count");
    m.tets.resize(nt);
    for (auto& t : m.tets)
        if (!(is >> t[0] >> t[1] >> t[2] >> t[3])) throw InvalidMesh("bad tet line");
    if (!(is >> nf) || nf < 0) throw InvalidMesh("bad facet count");
    for (long i = 0; i < nf; ++i) {
        std::array<int, 3> v{};
        int lab = 0;
        if (!(is >> v[0] >> v[1] >> v[2] >> lab)) throw InvalidMesh("bad facet line");
        if (lab >= 0) {
            m.boundary_facets.push_back({v, lab});
        } else {
            const Vec3 n = (m.vertices[v[1]] - m.vertices[v[0]]).cross(m.vertices[v[2]] - m.vertices[v[0]]);
            m.cut_facets.push_back({v, -lab, n.normalized()});
        }
    }
    m.build_topology();
    return m;
}

}  // namespace mdhw
