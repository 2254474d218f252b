#include "adsr/transform.hpp"

#include <cmath>

namespace adsr {

Mat3 orthonormalize(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
        Mat3 flip = Mat3::Identity();
        flip(2, 2) = -1;
        r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    return r;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.R = a.R * b.R;
    out.t = a.R * b.t + a.t;
    double drift = (out.R * out.R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (drift > 1e-12) out.R = orthonormalize(out.R);
    return out;
}

SimilarityTransform compose(const SimilarityTransform& a, const SimilarityTransform& b) {
    SimilarityTransform out;
    out.scale = a.scale * b.scale;
    out.rigid.R = a.rigid.R * b.rigid.R;
    out.rigid.t = a.scale * (a.rigid.R * b.rigid.t) + a.rigid.t;
    return out;
}

Mat3 axis_angle_to_matrix(const Vec3& aa) {
    double angle = aa.norm();
    if (angle < 1e-14) {
        // second-order expansion keeps gradients smooth near zero
        Mat3 k;
        k << 0, -aa.z(), aa.y(), aa.z(), 0, -aa.x(), -aa.y(), aa.x(), 0;
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

Vec3 matrix_to_axis_angle(const Mat3& R) {
    Eigen::AngleAxisd aa(R);
    return aa.angle() * aa.axis();
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
    Mat3 rel = a.transpose() * b;
    double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c);
}

}  // namespace adsr
