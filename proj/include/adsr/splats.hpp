#pragma once

#include <optional>
#include <vector>

#include "adsr/camera.hpp"
#include "adsr/image.hpp"
#include "adsr/mesh.hpp"

namespace adsr {

struct GaussianSet {
    std::vector<Vec3> means;
    std::vector<Vec3> scales;        // axis std-devs, strictly positive
    std::vector<Mat3> orientations;
    std::vector<double> opacities;   // [0,1]
    std::vector<Vec3> colors;        // [0,1]

    std::size_t size() const { return means.size(); }
    void append(const GaussianSet& other);
    Vec3 centroid() const;
};

/// Per-frame rigid correction about a pivot (object centroid).
struct CorrectivePose {
    Vec3 delta_rotation = Vec3::Zero();  // axis-angle
    Vec3 delta_translation = Vec3::Zero();
    Vec3 pivot = Vec3::Zero();

    RigidTransform to_rigid() const;
};

/// Means mapped to dR*(mu - pivot) + pivot + dT; orientations rotated,
/// everything else untouched.
GaussianSet apply_corrective(const GaussianSet& g, const CorrectivePose& pose);

/// One splat per vertex: isotropic scale 0.5x mean incident edge length,
/// opacity 0.8, vertex color or mid-gray.
GaussianSet init_gaussians_from_mesh(const TriMesh& mesh, double opacity = 0.8);

struct ProjectedSplat {
    Eigen::Vector2d mean;  // pixels
    Eigen::Matrix2d cov;   // pixels^2, includes the 0.3 px^2 low-pass
    double z = 0.0;        // camera-space depth
    bool culled = false;
};

/// EWA-style projection: 2D cov = J W Sigma W^T J^T + 0.3 I. Splats behind
/// the near plane (z <= 1e-4) come back culled.
ProjectedSplat project_gaussian(const Vec3& mean, const Vec3& scale, const Mat3& orient,
                                const Camera& camera);

struct RenderOutput {
    ImageRGB color;
    DepthGrid depth;
    Grid<float> alpha;
    MaskGrid object_id;  // dominant contributor per pixel, 0 = background
};

/// Tiled (16x16) front-to-back compositing, OpenMP over tiles.
/// splat_object_ids, when given, labels each splat for the id map.
RenderOutput rasterize(const GaussianSet& g, const Camera& camera,
                       const std::vector<int>* splat_object_ids = nullptr);

/// Serial per-pixel global-sort reference; the correctness oracle and the
/// benchmark baseline. Same math, no tiling.
RenderOutput rasterize_reference(const GaussianSet& g, const Camera& camera,
                                 const std::vector<int>* splat_object_ids = nullptr);

}  // namespace adsr
