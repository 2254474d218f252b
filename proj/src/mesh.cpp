#include "adsr/mesh.hpp"

#include <cmath>
#include <random>

#include "adsr/error.hpp"

namespace adsr {

void TriMesh::check_valid() const {
    const int n = static_cast<int>(vertices.size());
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& face = faces[f];
        for (int k = 0; k < 3; ++k) {
            if (face[k] < 0 || face[k] >= n)
                throw Error("face " + std::to_string(f) + " references vertex " +
                            std::to_string(face[k]) + " out of range");
        }
        if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
            throw Error("face " + std::to_string(f) + " references the same vertex twice");
    }
    if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
        throw Error("vertex_colors count does not match vertex count");
}

Vec3 TriMesh::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& v : vertices) c += v;
    return vertices.empty() ? c : Vec3(c / double(vertices.size()));
}

double TriMesh::surface_area() const {
    double a = 0;
    for (const auto& f : faces) {
        const Vec3 e1 = vertices[f[1]] - vertices[f[0]];
        const Vec3 e2 = vertices[f[2]] - vertices[f[0]];
        a += 0.5 * e1.cross(e2).norm();
    }
    return a;
}

double TriMesh::rms_radius() const {
    if (vertices.empty()) return 0;
    const Vec3 c = centroid();
    double s = 0;
    for (const auto& v : vertices) s += (v - c).squaredNorm();
    return std::sqrt(s / double(vertices.size()));
}

Vec3 PointCloud::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return points.empty() ? c : Vec3(c / double(points.size()));
}

double PointCloud::rms_radius() const {
    if (points.empty()) return 0;
    const Vec3 c = centroid();
    double s = 0;
    for (const auto& p : points) s += (p - c).squaredNorm();
    return std::sqrt(s / double(points.size()));
}

TriMesh apply_transform(const RigidTransform& T, const TriMesh& m) {
    TriMesh out = m;
    for (auto& v : out.vertices) v = T.apply(v);
    return out;
}

TriMesh apply_transform(const SimilarityTransform& T, const TriMesh& m) {
    TriMesh out = m;
    for (auto& v : out.vertices) v = T.apply(v);
    return out;
}

PointCloud apply_transform(const RigidTransform& T, const PointCloud& c) {
    PointCloud out = c;
    for (auto& p : out.points) p = T.apply(p);
    for (auto& n : out.normals) n = T.R * n;
    return out;
}

PointCloud apply_transform(const SimilarityTransform& T, const PointCloud& c) {
    PointCloud out = c;
    for (auto& p : out.points) p = T.apply(p);
    for (auto& n : out.normals) n = T.rigid.R * n;
    return out;
}

PointCloud sample_surface(const TriMesh& mesh, int n, std::uint64_t seed) {
    if (mesh.faces.empty()) throw Error("sample_surface: mesh has no triangles");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
        total += 0.5 * e1.cross(e2).norm();
        cumulative[i] = total;
    }
    if (total <= 0) throw Error("sample_surface: zero total surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    PointCloud out;
    out.points.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double r = uni(rng) * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), r);
        const auto& f = mesh.faces[it - cumulative.begin()];
        double u = uni(rng), v = uni(rng);
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        out.points.push_back(mesh.vertices[f[0]] +
                             u * (mesh.vertices[f[1]] - mesh.vertices[f[0]]) +
                             v * (mesh.vertices[f[2]] - mesh.vertices[f[0]]));
    }
    return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* barycentric) {
    auto result = [&](double u, double v, double w) {
        if (barycentric) *barycentric = Vec3(u, v, w);
        return u * a + v * b + w * c;
    };
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return result(1, 0, 0);

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return result(0, 1, 0);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        return result(1 - v, v, 0);
    }

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return result(0, 0, 1);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        return result(1 - w, 0, w);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return result(0, 1 - w, w);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return result(1 - v - w, v, w);
}

int closest_point_on_mesh(const TriMesh& mesh, const Vec3& p, Vec3* point,
                          Vec3* barycentric) {
    if (mesh.faces.empty()) throw Error("closest_point_on_mesh: empty mesh");
    double best = std::numeric_limits<double>::infinity();
    int best_face = -1;
    Vec3 best_point = Vec3::Zero(), best_bary = Vec3::Zero();
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        Vec3 bary;
        const Vec3 q = closest_point_on_triangle(p, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                                 mesh.vertices[f[2]], &bary);
        const double d = (q - p).squaredNorm();
        if (d < best) {
            best = d;
            best_face = static_cast<int>(i);
            best_point = q;
            best_bary = bary;
        }
    }
    if (point) *point = best_point;
    if (barycentric) *barycentric = best_bary;
    return best_face;
}

}  // namespace adsr
