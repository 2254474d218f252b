#pragma once

#include <Eigen/Dense>

namespace adsr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid body motion: p -> R*p + t.
struct RigidTransform {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return R * p + t; }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.R = R.transpose();
        inv.t = -(inv.R * t);
        return inv;
    }

    Mat4 matrix() const {
        Mat4 m = Mat4::Identity();
        m.topLeftCorner<3, 3>() = R;
        m.topRightCorner<3, 1>() = t;
        return m;
    }
};

/// result applies b first, then a. Re-orthonormalizes the rotation when
/// accumulated drift exceeds 1e-12.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

/// Closest rotation matrix (polar decomposition via SVD).
Mat3 orthonormalize(const Mat3& m);

/// Rodrigues: axis-angle 3-vector to rotation matrix.
Mat3 axis_angle_to_matrix(const Vec3& aa);

/// Inverse Rodrigues, angle in [0, pi].
Vec3 matrix_to_axis_angle(const Mat3& R);

/// Angle (radians) of the relative rotation between a and b.
double rotation_angle_between(const Mat3& a, const Mat3& b);

/// Uniform scale followed by a rigid motion: p -> s*R*p + t.
struct SimilarityTransform {
    double scale = 1.0;
    RigidTransform rigid;

    static SimilarityTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rigid.R * (scale * p) + rigid.t; }

    SimilarityTransform inverse() const {
        SimilarityTransform inv;
        inv.scale = 1.0 / scale;
        inv.rigid.R = rigid.R.transpose();
        inv.rigid.t = -(inv.rigid.R * rigid.t) / scale;
        return inv;
    }
};

SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b);

}  // namespace adsr
