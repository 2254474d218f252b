#include <doctest.h>

#include <cmath>
#include <random>

#include "adsr/error.hpp"
#include "adsr/lbs.hpp"
#include "test_util.hpp"

using namespace adsr;

namespace {

Mat4 translate4(const Vec3& t) {
    Mat4 m = Mat4::Identity();
    m.topRightCorner<3, 1>() = t;
    return m;
}

/// Two-bone planar arm: joint 0 at the origin, joint 1 at (len, 0, 0),
/// both rotating about z in the pose below.
SkinnedRig make_arm_rig(double len) {
    SkinnedRig rig;
    rig.n_b = 2;
    rig.parents = {-1, 0};
    rig.rest_transforms = {Mat4::Identity(), translate4(Vec3(len, 0, 0))};
    rig.inverse_bind = {Mat4::Identity(), translate4(Vec3(-len, 0, 0))};
    return rig;
}

/// Scripted forward position of a point rigidly attached to bone 1 of the
/// arm rig: rotate about joint 1, then carry through joint 0's rotation.
/// Written from the joint geometry directly, no matrix code shared with the
/// library.
Vec3 arm_bone1_expected(const Vec3& p, double len, double th0, double th1,
                        const Vec3& root_t) {
    auto rot_z = [](const Vec3& q, double th) {
        return Vec3(std::cos(th) * q.x() - std::sin(th) * q.y(),
                    std::sin(th) * q.x() + std::cos(th) * q.y(), q.z());
    };
    Vec3 local = p - Vec3(len, 0, 0);
    Vec3 after1 = rot_z(local, th1) + Vec3(len, 0, 0);
    return rot_z(after1, th0) + root_t;
}

}  // namespace

TEST_CASE("bone transforms match scripted two-bone arm kinematics") {
    const double len = 0.4;
    SkinnedRig rig = make_arm_rig(len);
    rig.check_valid();

    PoseParams pose;
    pose.joint_rotations = {Vec3(0, 0, 0.7), Vec3(0, 0, -0.3)};
    pose.root_translation = Vec3(0.05, -0.02, 0.11);
    BoneTransforms B = compute_bone_transforms(rig, pose);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        Vec3 p(u(rng) + len, u(rng), u(rng));
        Vec3 via_lib = B[1].topLeftCorner<3, 3>() * p + B[1].topRightCorner<3, 1>();
        Vec3 expected = arm_bone1_expected(p, len, 0.7, -0.3, pose.root_translation);
        CHECK((via_lib - expected).norm() < 1e-12);
    }

    // Bone 0 is a pure rotation about the origin plus the root shift.
    Vec3 q(0.1, 0.2, 0.3);
    Vec3 via0 = B[0].topLeftCorner<3, 3>() * q + B[0].topRightCorner<3, 1>();
    Vec3 exp0 = axis_angle_to_matrix(Vec3(0, 0, 0.7)) * q + pose.root_translation;
    CHECK((via0 - exp0).norm() < 1e-12);
}

TEST_CASE("lbs_apply blends weighted bone matrices") {
    // Half-weighted between identity and a 90-degree rotation about z:
    // 0.5*(I + R) applied to (1,0,0) gives (0.5, 0.5, 0).
    BoneTransforms B = {Mat4::Identity(), Mat4::Identity()};
    B[1].topLeftCorner<3, 3>() = axis_angle_to_matrix(Vec3(0, 0, M_PI / 2));
    B[1].topRightCorner<3, 1>() = Vec3(0, 0, 0.4);

    WeightRows w = {{{0, 0.5}, {1, 0.5}}};
    std::vector<Vec3> out = lbs_apply({Vec3(1, 0, 0)}, w, B);
    CHECK((out[0] - Vec3(0.5, 0.5, 0.2)).norm() < 1e-12);

    WeightRows mismatch = {{{0, 1.0}}, {{1, 1.0}}};
    CHECK_THROWS_AS(lbs_apply({Vec3(1, 0, 0)}, mismatch, B), Error);
}

TEST_CASE("rebase with identity canonical transforms is plain LBS") {
    SkinnedRig rig = make_arm_rig(0.4);
    PoseParams pose;
    pose.joint_rotations = {Vec3(0.1, 0.2, 0.3), Vec3(-0.2, 0.1, 0.4)};
    pose.root_translation = Vec3(0.01, 0.02, 0.03);
    BoneTransforms B_d = compute_bone_transforms(rig, pose);
    BoneTransforms B_c(2, Mat4::Identity());

    std::vector<Vec3> verts = {{0.1, 0.0, 0.0}, {0.4, 0.1, -0.1}, {0.7, 0.0, 0.1}};
    WeightRows w = {{{0, 1.0}}, {{0, 0.4}, {1, 0.6}}, {{1, 1.0}}};

    auto rebased = rebase_canonical(verts, w, B_c, B_d);
    auto plain = lbs_apply(verts, w, B_d);
    for (std::size_t i = 0; i < verts.size(); ++i)
        CHECK((rebased[i] - plain[i]).norm() < 1e-12);
}

TEST_CASE("rebase round trip is the identity") {
    SkinnedRig rig = make_arm_rig(0.4);
    PoseParams pose_c, pose_d;
    pose_c.joint_rotations = {Vec3(0, 0, 0.5), Vec3(0, 0.3, 0)};
    pose_d.joint_rotations = {Vec3(0.2, 0, -0.4), Vec3(0, 0, 0.8)};
    pose_d.root_translation = Vec3(0.1, 0, 0);
    BoneTransforms B_c = compute_bone_transforms(rig, pose_c);
    BoneTransforms B_d = compute_bone_transforms(rig, pose_d);

    std::vector<Vec3> verts = {{0.1, 0.05, 0.0}, {0.45, -0.1, 0.1}, {0.3, 0.2, -0.2}};
    WeightRows w = {{{0, 1.0}}, {{0, 0.3}, {1, 0.7}}, {{0, 0.8}, {1, 0.2}}};

    auto there = rebase_canonical(verts, w, B_c, B_d);
    auto back = rebase_canonical(there, w, B_d, B_c);
    for (std::size_t i = 0; i < verts.size(); ++i)
        CHECK((back[i] - verts[i]).norm() < 1e-9);
}

TEST_CASE("singular blended canonical matrix raises an error naming the vertex") {
    // 0.5*I + 0.5*Rz(pi) collapses the xy-plane: rank-deficient blend.
    BoneTransforms B_c = {Mat4::Identity(), Mat4::Identity()};
    B_c[1].topLeftCorner<3, 3>() = axis_angle_to_matrix(Vec3(0, 0, M_PI));
    BoneTransforms B_d(2, Mat4::Identity());
    WeightRows w = {{{0, 0.5}, {1, 0.5}}};

    try {
        rebase_canonical({Vec3(1, 2, 3)}, w, B_c, B_d);
        FAIL("expected an error for the singular blend");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
}

TEST_CASE("deform_sequence returns the canonical mesh at the canonical frame") {
    SkinnedRig rig = make_arm_rig(0.4);
    std::vector<PoseParams> poses(3);
    for (int t = 0; t < 3; ++t)
        poses[t].joint_rotations = {Vec3(0, 0, 0.2 * t), Vec3(0, 0, -0.1 * t)};

    TriMesh gen = testutil::make_box(0.2, 0.2, 0.2, Vec3(0.4, 0, 0));
    WeightRows w(gen.vertices.size(), {{1, 1.0}});

    auto frames = deform_sequence(gen, w, rig, poses, 1);
    REQUIRE(frames.size() == 3);
    for (std::size_t i = 0; i < gen.vertices.size(); ++i)
        CHECK((frames[1].vertices[i] - gen.vertices[i]).norm() < 1e-12);

    // Frame 2 against the scripted oracle: undo the frame-1 pose for a
    // bone-1 point (rotate back through joint 0, then joint 1), apply the
    // frame-2 pose.
    auto rot_z = [](const Vec3& q, double th) {
        return Vec3(std::cos(th) * q.x() - std::sin(th) * q.y(),
                    std::sin(th) * q.x() + std::cos(th) * q.y(), q.z());
    };
    for (std::size_t i = 0; i < gen.vertices.size(); ++i) {
        Vec3 rest = rot_z(gen.vertices[i], -0.2);
        rest = rot_z(rest - Vec3(0.4, 0, 0), 0.1) + Vec3(0.4, 0, 0);
        Vec3 expected = arm_bone1_expected(rest, 0.4, 0.4, -0.2, Vec3::Zero());
        CHECK((frames[2].vertices[i] - expected).norm() < 1e-9);
    }
}

TEST_CASE("weight transfer reproduces reference weights on a shared surface") {
    SkinnedRig rig = make_arm_rig(0.4);
    TriMesh ref = testutil::make_box(0.8, 0.2, 0.2, Vec3(0.4, 0, 0));
    rig.weights.resize(ref.vertices.size());
    for (std::size_t v = 0; v < ref.vertices.size(); ++v) {
        double a = std::clamp(ref.vertices[v].x() / 0.8, 0.0, 1.0);
        rig.weights[v] = {{0, 1.0 - a}, {1, a}};
    }
    rig.check_valid();

    TriMesh gen = ref;  // already aligned
    TransferredWeights w = transfer_skinning_weights(gen, ref, rig);
    REQUIRE(w.size() == gen.vertices.size());
    for (std::size_t v = 0; v < w.size(); ++v) {
        double sum = 0;
        double w1 = 0;
        for (const auto& [bone, wt] : w[v]) {
            sum += wt;
            if (bone == 1) w1 = wt;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        double a = std::clamp(gen.vertices[v].x() / 0.8, 0.0, 1.0);
        CHECK(w1 == doctest::Approx(a).epsilon(1e-6));
    }
}

TEST_CASE("align_generated_to_reference recovers a similarity") {
    // Asymmetric L-shape: two fused boxes, so the fit has a unique optimum.
    TriMesh ref = testutil::make_box(0.6, 0.3, 0.2);
    TriMesh wing = testutil::make_box(0.2, 0.5, 0.2, Vec3(0.2, 0.35, 0));
    int base = int(ref.vertices.size());
    ref.vertices.insert(ref.vertices.end(), wing.vertices.begin(), wing.vertices.end());
    for (auto f : wing.faces)
        ref.faces.push_back({f[0] + base, f[1] + base, f[2] + base});

    SimilarityTransform gt;
    gt.scale = 0.8;
    gt.rigid.R = axis_angle_to_matrix(Vec3(0.05, 0.15, -0.1));
    gt.rigid.t = Vec3(0.2, -0.1, 0.4);
    // gen = gt^-1(ref); aligning gen onto ref should recover gt.
    TriMesh gen = apply_transform(gt.inverse(), ref);

    AlignResult res = align_generated_to_reference(gen, ref);
    CHECK(res.converged);
    CHECK(res.transform.scale == doctest::Approx(gt.scale).epsilon(3e-2));
    CHECK(rotation_angle_between(res.transform.rigid.R, gt.rigid.R) < 0.05);
    for (const Vec3& v : gen.vertices)
        CHECK((res.transform.apply(v) - gt.apply(v)).norm() < 0.06);
}

TEST_CASE("rig and pose files round trip") {
    auto dir = testutil::temp_dir("lbs_io");
    SkinnedRig rig = make_arm_rig(0.4);
    rig.weights = {{{0, 0.25}, {1, 0.75}}, {{0, 1.0}}};

    std::string rpath = (dir / "rig.json").string();
    save_rig(rig, rpath);
    SkinnedRig back = load_rig(rpath);
    CHECK(back.n_b == 2);
    CHECK(back.parents == rig.parents);
    for (int k = 0; k < 2; ++k)
        CHECK((back.rest_transforms[k] - rig.rest_transforms[k]).norm() < 1e-12);
    REQUIRE(back.weights.size() == 2);
    CHECK(back.weights[0][1].second == doctest::Approx(0.75));

    std::vector<PoseParams> poses(2);
    poses[1].joint_rotations = {Vec3(0.1, 0.2, 0.3), Vec3(-0.4, 0, 0)};
    poses[1].root_translation = Vec3(1, 2, 3);
    poses[0].joint_rotations = {Vec3::Zero(), Vec3::Zero()};
    std::string ppath = (dir / "poses.json").string();
    save_poses(poses, ppath);
    auto pback = load_poses(ppath);
    REQUIRE(pback.size() == 2);
    CHECK((pback[1].joint_rotations[0] - Vec3(0.1, 0.2, 0.3)).norm() < 1e-12);
    CHECK((pback[1].root_translation - Vec3(1, 2, 3)).norm() < 1e-12);
}

TEST_CASE("rig validity rejects bad structure") {
    SkinnedRig rig = make_arm_rig(0.4);
    rig.parents = {1, 0};  // not topologically sorted
    CHECK_THROWS_AS(rig.check_valid(), Error);

    rig = make_arm_rig(0.4);
    rig.weights = {{{0, 0.5}, {1, 0.2}}};  // sums to 0.7
    CHECK_THROWS_AS(rig.check_valid(), Error);

    rig = make_arm_rig(0.4);
    rig.inverse_bind[1] = Mat4::Identity();  // not the inverse of rest
    CHECK_THROWS_AS(rig.check_valid(), Error);
}
