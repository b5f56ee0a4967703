#include "mdhw/cutoff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mdhw/errors.hpp"

namespace mdhw {

namespace {

const GaussRule& gauss64() {
    static const GaussRule g = gauss_legendre(64);
    return g;
}

double bump(double s) {
    const double q = 1.0 - s * s;
    return q > 0.0 ? std::exp(-1.0 / q) : 0.0;
}

// closest point to p on triangle abc
Vec3 closest_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

// ---- distance ----

BoundaryDistance::BoundaryDistance(const ReferenceMesh& m) {
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::max());
    lo_ = Vec3::Constant(std::numeric_limits<double>::max());
    double edge_sum = 0.0;
    for (int f : m.boundary_faces) {
        const auto& v = m.faces[f];
        tris_.push_back({m.vertices[v[0]], m.vertices[v[1]], m.vertices[v[2]]});
        for (const Vec3& x : tris_.back()) {
            lo_ = lo_.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        edge_sum += (tris_.back()[1] - tris_.back()[0]).norm();
    }
    if (tris_.empty()) throw InvalidMesh("mesh has no boundary facets");
    const double extent = (hi - lo_).maxCoeff();
    cell_ = std::max(2.0 * edge_sum / tris_.size(), extent / 96.0);
    lo_ -= Vec3::Constant(1e-9 * extent);
    for (int d = 0; d < 3; ++d) dims_[d] = std::max(1, static_cast<int>(std::ceil((hi[d] - lo_[d]) / cell_)) + 1);
    buckets_.assign(static_cast<size_t>(dims_[0]) * dims_[1] * dims_[2], {});
    for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
        Vec3 a = tris_[t][0].cwiseMin(tris_[t][1]).cwiseMin(tris_[t][2]);
        Vec3 b = tris_[t][0].cwiseMax(tris_[t][1]).cwiseMax(tris_[t][2]);
        std::array<int, 3> i0, i1;
        for (int d = 0; d < 3; ++d) {
            i0[d] = std::clamp(static_cast<int>((a[d] - lo_[d]) / cell_), 0, dims_[d] - 1);
            i1[d] = std::clamp(static_cast<int>((b[d] - lo_[d]) / cell_), 0, dims_[d] - 1);
        }
        for (int k = i0[2]; k <= i1[2]; ++k)
            for (int j = i0[1]; j <= i1[1]; ++j)
                for (int i = i0[0]; i <= i1[0]; ++i) buckets_[bucket_index(i, j, k)].push_back(t);
    }
}

double BoundaryDistance::operator()(const Vec3& p, Vec3* grad) const {
    std::array<int, 3> c;
    for (int d = 0; d < 3; ++d) c[d] = std::clamp(static_cast<int>((p[d] - lo_[d]) / cell_), 0, dims_[d] - 1);
    const int rmax = std::max({dims_[0], dims_[1], dims_[2]});
    double best2 = std::numeric_limits<double>::max();
    Vec3 best_q = p;
    for (int r = 0; r <= rmax; ++r) {
        for (int k = c[2] - r; k <= c[2] + r; ++k) {
            if (k < 0 || k >= dims_[2]) continue;
            for (int j = c[1] - r; j <= c[1] + r; ++j) {
                if (j < 0 || j >= dims_[1]) continue;
                for (int i = c[0] - r; i <= c[0] + r; ++i) {
                    if (i < 0 || i >= dims_[0]) continue;
                    if (std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])}) != r) continue;
                    for (int t : buckets_[bucket_index(i, j, k)]) {
                        const Vec3 q = closest_on_triangle(p, tris_[t][0], tris_[t][1], tris_[t][2]);
                        const double d2 = (p - q).squaredNorm();
                        if (d2 < best2) {
                            best2 = d2;
                            best_q = q;
                        }
                    }
                }
            }
        }
        // every cell beyond ring r is at least r cells away
        const double reach = r * cell_;
        if (best2 <= reach * reach) break;
    }
    const double d = std::sqrt(best2);
    if (grad) *grad = d > 0.0 ? Vec3((p - best_q) / d) : Vec3::Zero();
    return d;
}

FEField distance_to_boundary(const ReferenceMesh& m) {
    const BoundaryDistance dist(m);
    VectorXd d(m.nv());
    for (int v = 0; v < m.nv(); ++v) d[v] = m.vertex_label[v] >= 0 ? 0.0 : dist(m.vertices[v]);
    return {FieldKind::NodalScalar, d};
}

// ---- profile ----

double xi_profile(double z, double rho) {
    const double k1 = std::exp(-2.0 / rho), k2 = std::exp(-1.0 / rho);
    if (z < k1) return 1.0;
    if (z < k2) return rho * std::log(k2 / z);
    return 0.0;
}

CutoffFunction::CutoffFunction(double rho, double lambda)
    : rho_(rho), lambda_(lambda), k1_(std::exp(-2.0 / rho)), k2_(std::exp(-1.0 / rho)) {
    Segment s;
    s.a = k1_ + lambda_;
    s.b = k2_ - lambda_;
    s.log_spaced = true;
    const int n = 1024;
    const double la = std::log(s.a), lb = std::log(s.b);
    for (int i = 0; i < n; ++i) {
        const double z = i == n - 1 ? s.b : std::exp(la + (lb - la) * i / (n - 1));
        double v, dv;
        direct(z, v, dv);
        s.z.push_back(z);
        s.v.push_back(v);
        s.dv.push_back(dv);
    }
    segs_.push_back(std::move(s));
}

void CutoffFunction::direct(double z, double& v, double& dv) const {
    // kinks of xi(z - lambda s) split [-1, 1]
    std::vector<double> cuts{-1.0};
    for (double k : {k1_, k2_}) {
        const double s = (z - k) / lambda_;
        if (s > -1.0 && s < 1.0) cuts.push_back(s);
    }
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    const GaussRule& g = gauss64();
    double N = 0.0, V = 0.0, D = 0.0;
    for (size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double a = cuts[p], b = cuts[p + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t q = 0; q < g.x.size(); ++q) {
            const double s = mid + half * g.x[q];
            const double w = half * g.w[q] * bump(s);
            const double zeta = z - lambda_ * s;
            N += w;
            if (zeta < k1_) {
                V += w;
            } else if (zeta < k2_) {
                V += w * rho_ * std::log(k2_ / zeta);
                D -= w * rho_ / zeta;
            }
        }
    }
    v = V / N;
    dv = D / N;
}

double CutoffFunction::value_direct(double z) const {
    double v, dv;
    direct(z, v, dv);
    return v;
}

double CutoffFunction::derivative_direct(double z) const {
    double v, dv;
    direct(z, v, dv);
    return dv;
}

namespace {

// cubic Hermite on [z0, z1]
void hermite(double z, double z0, double z1, double v0, double v1, double d0, double d1, double& v, double& dv) {
    const double h = z1 - z0, s = (z - z0) / h;
    const double s2 = s * s, s3 = s2 * s;
    v = (2 * s3 - 3 * s2 + 1) * v0 + (s3 - 2 * s2 + s) * h * d0 + (-2 * s3 + 3 * s2) * v1 + (s3 - s2) * h * d1;
    dv = ((6 * s2 - 6 * s) * v0 + (3 * s2 - 4 * s + 1) * h * d0 + (-6 * s2 + 6 * s) * v1 + (3 * s2 - 2 * s) * h * d1) / h;
}

}  // namespace

double CutoffFunction::value(double z) const {
    if (z <= k1_ - lambda_) return 1.0;
    if (z >= k2_ + lambda_) return 0.0;
    const Segment& s = segs_[0];
    if (z <= s.a || z >= s.b) return value_direct(z);
    const size_t i = std::min<size_t>(std::upper_bound(s.z.begin(), s.z.end(), z) - s.z.begin(), s.z.size() - 1);
    double v, dv;
    hermite(z, s.z[i - 1], s.z[i], s.v[i - 1], s.v[i], s.dv[i - 1], s.dv[i], v, dv);
    return v;
}

double CutoffFunction::derivative(double z) const {
    if (z <= k1_ - lambda_ || z >= k2_ + lambda_) return 0.0;
    const Segment& s = segs_[0];
    if (z <= s.a || z >= s.b) return derivative_direct(z);
    const size_t i = std::min<size_t>(std::upper_bound(s.z.begin(), s.z.end(), z) - s.z.begin(), s.z.size() - 1);
    double v, dv;
    hermite(z, s.z[i - 1], s.z[i], s.v[i - 1], s.v[i], s.dv[i - 1], s.dv[i], v, dv);
    return dv;
}

CutoffProfile build_cutoff(const ReferenceMesh& m, double rho, double delta, const CutoffOptions& opts) {
    if (!(opts.d_star > 0.0 && opts.d_star < 1.0)) throw BadParameters("d_star must lie in (0, 1)");
    const double rho_star = std::min(1.0, -1.0 / std::log(opts.d_star));
    if (!(rho > 0.0 && rho < rho_star))
        throw BadParameters("rho must lie in (0, " + std::to_string(rho_star) + ")");
    if (!(delta > 0.0 && 2.0 * delta < rho)) throw BadParameters("need 0 < 2 delta < rho");
    const double lambda_max = 0.25 * std::exp(-2.0 / delta);
    const double lambda = opts.lambda > 0.0 ? opts.lambda : 0.5 * lambda_max;
    if (!(lambda < lambda_max)) throw BadParameters("need lambda < exp(-2/delta) / 4");

    CutoffProfile c;
    c.rho = rho;
    c.delta = delta;
    c.lambda = lambda;
    c.d_star = opts.d_star;
    c.Theta = std::make_shared<CutoffFunction>(rho, lambda);
    const CutoffFunction& Th = *c.Theta;

    const BoundaryDistance dist(m);
    VectorXd d(m.nv()), th(m.nv()), g(3 * m.nv());
    for (int v = 0; v < m.nv(); ++v) {
        Vec3 grad = Vec3::Zero();
        d[v] = m.vertex_label[v] >= 0 ? 0.0 : dist(m.vertices[v], &grad);
        th[v] = Th.value(d[v]);
        g.segment<3>(3 * v) = Th.derivative(d[v]) * grad;
    }
    c.distance = {FieldKind::NodalScalar, d};
    c.theta = {FieldKind::NodalScalar, th};
    c.grad_theta = {FieldKind::NodalVector, g};

    const auto& Q = tet_quadrature();
    c.qp_distance.resize(4 * m.nt());
    c.qp_theta.resize(4 * m.nt());
    c.qp_grad.resize(4 * m.nt());
    for (int t = 0; t < m.nt(); ++t)
        for (int k = 0; k < 4; ++k) {
            Vec3 y = Vec3::Zero();
            for (int i = 0; i < 4; ++i) y += Q.bary[k][i] * m.vertices[m.tets[t][i]];
            Vec3 grad;
            const double dq = dist(y, &grad);
            c.qp_distance[4 * t + k] = dq;
            c.qp_theta[4 * t + k] = Th.value(dq);
            c.qp_grad[4 * t + k] = Th.derivative(dq) * grad;
        }
    return c;
}

double gradient_bound_ratio(const CutoffProfile& c) {
    double worst = 0.0;
    for (size_t q = 0; q < c.qp_distance.size(); ++q)
        if (c.qp_distance[q] > 0.0)
            worst = std::max(worst, c.qp_grad[q].norm() * c.qp_distance[q] / (2.0 * std::sqrt(3.0) * c.rho));
    return worst;
}

LerayPairing leray_pairing(const ReferenceMesh& m, const FEField& u, const CutoffProfile& c, const FEField& w,
                           const DomainMotion& motion, double t) {
    if (u.kind != FieldKind::NodalVector || w.kind != FieldKind::NodalVector || !u.matches(m) || !w.matches(m))
        throw BadParameters("leray_pairing needs nodal vector fields on the mesh");
    const auto& Q = tet_quadrature();
    LerayPairing out;
    for (int cell = 0; cell < m.nt(); ++cell) {
        const TetBasis B(m, cell);
        const auto& tv = m.tets[cell];
        Mat3 du = Mat3::Zero(), dw = Mat3::Zero();  // (component, direction)
        for (int i = 0; i < 4; ++i) {
            du += u.values.segment<3>(3 * tv[i]) * B.grad.row(i);
            dw += w.values.segment<3>(3 * tv[i]) * B.grad.row(i);
        }
        out.grad_u_sq += B.volume * du.squaredNorm();
        bool active = false;
        for (int k = 0; k < 4; ++k)
            if (c.qp_theta[4 * cell + k] != 0.0) active = true;
        if (!active) continue;
        for (int k = 0; k < 4; ++k) {
            const double th = c.qp_theta[4 * cell + k];
            if (th == 0.0) continue;
            Vec3 y = Vec3::Zero(), uq = Vec3::Zero(), wq = Vec3::Zero();
            for (int i = 0; i < 4; ++i) {
                y += Q.bary[k][i] * m.vertices[tv[i]];
                uq += Q.bary[k][i] * u.values.segment<3>(3 * tv[i]);
                wq += Q.bary[k][i] * w.values.segment<3>(3 * tv[i]);
            }
            const MetricSample g = metric_at_ref(motion, y, t);
            const KernelTensors K = rot_kernels_ref(motion, y, t);
            Vec3 conv = Vec3::Zero();  // sum_n u^n nabla_n u^i
            for (int i = 0; i < 3; ++i)
                for (int n = 0; n < 3; ++n) {
                    double cov = du(i, n);
                    for (int l = 0; l < 3; ++l) cov += g.christoffel[i](n, l) * uq[l];
                    conv[i] += uq[n] * cov;
                }
            const Mat3 dtw = th * dw + wq * c.qp_grad[4 * cell + k].transpose();
            const Vec3 r = apply_rot(K, th * wq, dtw);
            out.value += Q.weight[k] * B.volume * conv.dot(g.g_lower * r) * g.J;
        }
    }
    out.ratio = out.grad_u_sq > 0.0 ? out.value / out.grad_u_sq : 0.0;
    return out;
}

double hardy_ratio(const ReferenceMesh& m, const FEField& u, const CutoffProfile& c) {
    if (u.kind != FieldKind::NodalVector || !u.matches(m)) throw BadParameters("hardy_ratio needs a nodal vector field");
    const auto& Q = tet_quadrature();
    double num = 0.0, den = 0.0;
    for (int cell = 0; cell < m.nt(); ++cell) {
        const TetBasis B(m, cell);
        const auto& tv = m.tets[cell];
        Mat3 du = Mat3::Zero();
        for (int i = 0; i < 4; ++i) du += u.values.segment<3>(3 * tv[i]) * B.grad.row(i);
        den += B.volume * du.squaredNorm();
        for (int k = 0; k < 4; ++k) {
            Vec3 uq = Vec3::Zero();
            for (int i = 0; i < 4; ++i) uq += Q.bary[k][i] * u.values.segment<3>(3 * tv[i]);
            const double d = c.qp_distance[4 * cell + k];
            num += Q.weight[k] * B.volume * uq.squaredNorm() / (d * d);
        }
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

double select_rho(const std::function<double(double)>& ratio, double eps, double rho_max, double rho_min,
                  int iterations) {
    if (ratio(rho_max) <= eps) return rho_max;
    double hi = rho_max, lo = 0.5 * rho_max;
    while (ratio(lo) > eps) {
        hi = lo;
        lo *= 0.5;
        if (lo < rho_min) return 0.0;
    }
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ratio(mid) <= eps)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

}  // namespace mdhw
