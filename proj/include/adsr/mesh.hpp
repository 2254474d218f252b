#pragma once

#include <array>
#include <optional>
#include <vector>

#include "adsr/transform.hpp"

namespace adsr {

/// Indexed triangle surface, optional per-vertex RGB in [0,1].
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> vertex_colors;  // empty or one per vertex

    bool has_colors() const { return !vertex_colors.empty(); }

    /// Throws Error on bad face indices, degenerate faces, or a
    /// color/vertex count mismatch.
    void check_valid() const;

    Vec3 centroid() const;
    double surface_area() const;
    /// Mean distance of vertices from the centroid (RMS).
    double rms_radius() const;
};

struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;  // empty or one unit vector per point

    bool has_normals() const { return !normals.empty(); }
    Vec3 centroid() const;
    double rms_radius() const;
};

TriMesh apply_transform(const RigidTransform& T, const TriMesh& m);
TriMesh apply_transform(const SimilarityTransform& T, const TriMesh& m);
PointCloud apply_transform(const RigidTransform& T, const PointCloud& c);
PointCloud apply_transform(const SimilarityTransform& T, const PointCloud& c);

/// Area-uniform surface sampling with a caller-owned RNG state.
PointCloud sample_surface(const TriMesh& mesh, int n, std::uint64_t seed);

/// Closest point on a triangle to p (Ericson-style region walk), plus the
/// barycentric coordinates of the result.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* barycentric = nullptr);

/// Closest point on the whole surface; returns face index, fills barycentric
/// coords of the hit. Brute force over faces (parallelized by callers that
/// batch queries).
int closest_point_on_mesh(const TriMesh& mesh, const Vec3& p, Vec3* point,
                          Vec3* barycentric);

}  // namespace adsr
