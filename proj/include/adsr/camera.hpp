#pragma once

#include "adsr/transform.hpp"

namespace adsr {

/// Pinhole camera, world-to-camera convention. Camera looks down +z,
/// image origin top-left, pixel centers at integer coordinates.
struct Camera {
    double fx = 0, fy = 0;
    double cx = 0, cy = 0;
    int width = 0, height = 0;
    RigidTransform world_to_camera;

    void check_valid() const;

    Vec3 world_to_cam(const Vec3& p) const { return world_to_camera.apply(p); }
    Vec3 cam_to_world(const Vec3& p) const { return world_to_camera.inverse().apply(p); }

    /// Projects a camera-space point; caller must ensure z > 0.
    Eigen::Vector2d project_cam(const Vec3& pc) const {
        return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
    }

    /// Back-projects pixel (u,v) at depth d into camera space.
    Vec3 backproject_cam(double u, double v, double d) const {
        return {(u - cx) * d / fx, (v - cy) * d / fy, d};
    }
};

}  // namespace adsr
