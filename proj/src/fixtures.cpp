#include "adsr/fixtures.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

#include "adsr/error.hpp"
#include "adsr/image.hpp"
#include "adsr/lbs.hpp"
#include "adsr/mesh_io.hpp"
#include "adsr/splats.hpp"

namespace fs = std::filesystem;

namespace adsr {

namespace {

constexpr double kPi = std::numbers::pi;

Mat3 rot_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }

/// Axis-aligned box with a (res x res) vertex grid per face.
TriMesh make_box(const Vec3& center, const Vec3& size, int res, const Vec3& color) {
    TriMesh mesh;
    const Vec3 half = size / 2;
    auto add_face = [&](const Vec3& origin, const Vec3& du, const Vec3& dv) {
        const int base = static_cast<int>(mesh.vertices.size());
        for (int j = 0; j <= res; ++j)
            for (int i = 0; i <= res; ++i) {
                const double u = double(i) / res, v = double(j) / res;
                mesh.vertices.push_back(center + origin + u * du + v * dv);
                mesh.vertex_colors.push_back(color);
            }
        for (int j = 0; j < res; ++j)
            for (int i = 0; i < res; ++i) {
                const int a = base + j * (res + 1) + i;
                const int b = a + 1, c = a + res + 1, d = c + 1;
                mesh.faces.push_back({a, b, d});
                mesh.faces.push_back({a, d, c});
            }
    };
    const Vec3 x(size.x(), 0, 0), y(0, size.y(), 0), z(0, 0, size.z());
    add_face(Vec3(-half.x(), -half.y(), -half.z()), x, y);  // front (-z)
    add_face(Vec3(-half.x(), -half.y(), half.z()), y, x);   // back
    add_face(Vec3(-half.x(), -half.y(), -half.z()), z, x);  // bottom
    add_face(Vec3(-half.x(), half.y(), -half.z()), x, z);   // top
    add_face(Vec3(-half.x(), -half.y(), -half.z()), y, z);  // left
    add_face(Vec3(half.x(), -half.y(), -half.z()), z, y);   // right
    return mesh;
}

/// Cylinder along +y from base, closed with end caps.
TriMesh make_cylinder(const Vec3& base, double length, double radius, int segments,
                      int stacks, const Vec3& color) {
    TriMesh mesh;
    for (int s = 0; s <= stacks; ++s) {
        const double y = length * double(s) / stacks;
        for (int k = 0; k < segments; ++k) {
            const double a = 2 * kPi * k / segments;
            mesh.vertices.push_back(base + Vec3(radius * std::cos(a), y, radius * std::sin(a)));
            mesh.vertex_colors.push_back(color);
        }
    }
    for (int s = 0; s < stacks; ++s)
        for (int k = 0; k < segments; ++k) {
            const int a = s * segments + k;
            const int b = s * segments + (k + 1) % segments;
            const int c = a + segments, d = b + segments;
            mesh.faces.push_back({a, b, d});
            mesh.faces.push_back({a, d, c});
        }
    // caps
    const int bottom_center = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(base);
    mesh.vertex_colors.push_back(color);
    const int top_center = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(base + Vec3(0, length, 0));
    mesh.vertex_colors.push_back(color);
    for (int k = 0; k < segments; ++k) {
        mesh.faces.push_back({bottom_center, (k + 1) % segments, k});
        const int top0 = stacks * segments;
        mesh.faces.push_back({top_center, top0 + k, top0 + (k + 1) % segments});
    }
    return mesh;
}

Camera fixture_camera(int width, int height, double focal) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = width / 2.0;
    cam.cy = height / 2.0;
    return cam;
}

struct FixtureObject {
    std::string id;
    ObjectClass cls;
    int canonical_frame = 0;
    TriMesh canonical_mesh;              // as stored in the manifest (object space)
    std::vector<TriMesh> frame_meshes;   // ground truth, scene space
    std::string rig_path, pose_path;
};

/// Exact mesh depth + id maps via a z-buffer; perspective-correct depth from
/// screen-space linear 1/z.
void rasterize_mesh_depth(const std::vector<FixtureObject>& objects, int frame,
                          const Camera& cam, DepthGrid* depth, MaskGrid* mask) {
    *depth = DepthGrid(cam.width, cam.height, std::numeric_limits<float>::quiet_NaN());
    *mask = MaskGrid(cam.width, cam.height, 0);
    Grid<float> zbuf(cam.width, cam.height, std::numeric_limits<float>::infinity());

    for (std::size_t oi = 0; oi < objects.size(); ++oi) {
        const TriMesh& m = objects[oi].frame_meshes[frame];
        for (const auto& f : m.faces) {
            Vec3 pc[3];
            Eigen::Vector2d uv[3];
            bool behind = false;
            for (int k = 0; k < 3; ++k) {
                pc[k] = cam.world_to_cam(m.vertices[f[k]]);
                if (pc[k].z() <= 1e-6) { behind = true; break; }
                uv[k] = cam.project_cam(pc[k]);
            }
            if (behind) continue;
            const double area = (uv[1] - uv[0]).x() * (uv[2] - uv[0]).y() -
                                (uv[1] - uv[0]).y() * (uv[2] - uv[0]).x();
            if (std::abs(area) < 1e-12) continue;
            const int x0 = std::max(0, int(std::ceil(std::min({uv[0].x(), uv[1].x(), uv[2].x()}))));
            const int x1 = std::min(cam.width - 1,
                                    int(std::floor(std::max({uv[0].x(), uv[1].x(), uv[2].x()}))));
            const int y0 = std::max(0, int(std::ceil(std::min({uv[0].y(), uv[1].y(), uv[2].y()}))));
            const int y1 = std::min(cam.height - 1,
                                    int(std::floor(std::max({uv[0].y(), uv[1].y(), uv[2].y()}))));
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x) {
                    const Eigen::Vector2d p(x, y);
                    const double w0 = ((uv[1] - p).x() * (uv[2] - p).y() -
                                       (uv[1] - p).y() * (uv[2] - p).x()) / area;
                    const double w1 = ((uv[2] - p).x() * (uv[0] - p).y() -
                                       (uv[2] - p).y() * (uv[0] - p).x()) / area;
                    const double w2 = 1.0 - w0 - w1;
                    if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                    const double inv_z = w0 / pc[0].z() + w1 / pc[1].z() + w2 / pc[2].z();
                    const float z = float(1.0 / inv_z);
                    if (z < zbuf.at(x, y)) {
                        zbuf.at(x, y) = z;
                        depth->at(x, y) = z;
                        mask->at(x, y) = std::uint8_t(oi + 1);
                    }
                }
        }
    }
}

/// Renders RGB from the ground-truth meshes with the splat rasterizer and
/// depth/mask from an exact mesh z-buffer, writes all assets, and returns
/// the manifest path.
std::string emit_fixture(const std::string& out_dir, const Camera& cam,
                         std::vector<FixtureObject>& objects, std::uint64_t seed) {
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/gt");
    const int n_frames = static_cast<int>(objects.front().frame_meshes.size());

    SceneManifest manifest;
    manifest.seed = seed;
    manifest.base_dir = out_dir;

    for (std::size_t i = 0; i < objects.size(); ++i) {
        auto& o = objects[i];
        ObjectEntry e;
        e.id = o.id;
        e.cls = o.cls;
        e.canonical_frame = o.canonical_frame;
        e.mesh_path = o.id + "_canonical.ply";
        save_mesh(o.canonical_mesh, out_dir + "/" + e.mesh_path);
        e.rig_path = o.rig_path;
        e.pose_path = o.pose_path;
        manifest.objects.push_back(e);
        manifest.mask_ids[o.id] = static_cast<int>(i) + 1;

        std::vector<std::string> gt_paths;
        for (int t = 0; t < n_frames; ++t) {
            const std::string rel = "gt/" + o.id + "_f" + std::to_string(t) + ".ply";
            save_mesh(o.frame_meshes[t], out_dir + "/" + rel);
            gt_paths.push_back(rel);
        }
        manifest.ground_truth[o.id] = gt_paths;
    }

    for (int t = 0; t < n_frames; ++t) {
        GaussianSet scene;
        std::vector<int> ids;
        for (std::size_t i = 0; i < objects.size(); ++i) {
            // same default opacity the refinement model uses, so the rendered
            // observation is consistent with it
            GaussianSet g = init_gaussians_from_mesh(objects[i].frame_meshes[t]);
            ids.insert(ids.end(), g.size(), static_cast<int>(i) + 1);
            scene.append(g);
        }
        const RenderOutput render = rasterize(scene, cam, &ids);

        DepthGrid depth;
        MaskGrid mask;
        rasterize_mesh_depth(objects, t, cam, &depth, &mask);

        FrameEntry fe;
        fe.camera = cam;
        fe.rgb_path = "rgb_f" + std::to_string(t) + ".png";
        fe.depth_path = "depth_f" + std::to_string(t) + ".f32";
        fe.mask_path = "mask_f" + std::to_string(t) + ".png";
        save_image_png(render.color, out_dir + "/" + fe.rgb_path);
        save_depth(depth, out_dir + "/" + fe.depth_path);
        save_mask_png(mask, out_dir + "/" + fe.mask_path);
        manifest.frames.push_back(fe);
    }

    const std::string manifest_path = out_dir + "/manifest.json";
    save_manifest(manifest, manifest_path);
    return manifest_path;
}

TriMesh centered(const TriMesh& m) {
    TriMesh out = m;
    const Vec3 c = m.centroid();
    for (auto& v : out.vertices) v -= c;
    return out;
}

/// Rotates a mesh about its centroid; boxes seen corner-on keep three faces
/// visible, which the depth-based fitters need.
TriMesh tilted(const TriMesh& m, double rx_deg, double ry_deg) {
    const Vec3 c = m.centroid();
    TriMesh out = m;
    const Mat3 R = rot_x(rx_deg * kPi / 180.0) * rot_y(ry_deg * kPi / 180.0);
    for (auto& v : out.vertices) v = R * (v - c) + c;
    return out;
}

FixtureObject orbit_cube() {
    const OrbitParams p = rigid_orbit_params();
    FixtureObject obj;
    obj.id = "cube";
    obj.cls = ObjectClass::Rigid;
    RigidTransform place;  // frame-0 scene position on the orbit
    // corner-on tilt: three faces stay visible through the whole sweep, so
    // the depth clouds constrain all six pose degrees of freedom
    place.R = rot_x(30.0 * kPi / 180.0) * rot_y(40.0 * kPi / 180.0);
    place.t = Vec3(0, 0, 1.8) + Vec3(p.orbit_radius, 0, 0);
    const TriMesh base = apply_transform(
        place, make_box(Vec3::Zero(), Vec3::Constant(p.cube_edge), 8, Vec3(0.85, 0.2, 0.2)));
    for (int t = 0; t < p.n_frames; ++t)
        obj.frame_meshes.push_back(apply_transform(rigid_orbit_gt_transform(t), base));
    // stored canonical mesh is centered at the origin: the pipeline must
    // recover the scene placement itself
    obj.canonical_mesh = centered(obj.frame_meshes[p.canonical_frame]);
    return obj;
}

struct ArmFixture {
    TriMesh canonical_mesh;
    SkinnedRig rig;
    std::vector<PoseParams> poses;
    std::vector<TriMesh> frame_meshes;
};

/// Two-bone cylinder arm, elbow halfway up, linear elbow sweep about z.
ArmFixture make_arm(const Vec3& base, int n_frames, double sweep_rad) {
    ArmFixture arm;
    const double length = 0.6, radius = 0.05;
    const TriMesh rest = make_cylinder(base, length, radius, 16, 12, Vec3(0.2, 0.7, 0.25));

    arm.rig.n_b = 2;
    arm.rig.parents = {-1, 0};
    Mat4 b0 = Mat4::Identity();
    b0.topRightCorner<3, 1>() = base;
    Mat4 b1 = Mat4::Identity();
    b1.topRightCorner<3, 1>() = base + Vec3(0, length / 2, 0);
    arm.rig.rest_transforms = {b0, b1};
    arm.rig.inverse_bind = {b0.inverse(), b1.inverse()};

    // smooth weight ramp across the elbow
    const double elbow = base.y() + length / 2, band = 0.08;
    arm.rig.weights.resize(rest.vertices.size());
    for (std::size_t v = 0; v < rest.vertices.size(); ++v) {
        const double y = rest.vertices[v].y();
        double w1 = std::clamp((y - (elbow - band)) / (2 * band), 0.0, 1.0);
        if (w1 <= 0)
            arm.rig.weights[v] = {{0, 1.0}};
        else if (w1 >= 1)
            arm.rig.weights[v] = {{1, 1.0}};
        else
            arm.rig.weights[v] = {{0, 1.0 - w1}, {1, w1}};
    }

    for (int t = 0; t < n_frames; ++t) {
        PoseParams p;
        const double frac = n_frames > 1 ? double(t) / (n_frames - 1) : 0.0;
        p.joint_rotations = {Vec3::Zero(), Vec3(0, 0, sweep_rad * frac)};
        arm.poses.push_back(p);
    }

    // canonical mesh is the frame-0 posed mesh
    const BoneTransforms B_c = compute_bone_transforms(arm.rig, arm.poses[0]);
    arm.canonical_mesh = rest;
    arm.canonical_mesh.vertices = lbs_apply(rest.vertices, arm.rig.weights, B_c);
    for (int t = 0; t < n_frames; ++t) {
        TriMesh m = rest;
        m.vertices = lbs_apply(rest.vertices, arm.rig.weights,
                               compute_bone_transforms(arm.rig, arm.poses[t]));
        arm.frame_meshes.push_back(std::move(m));
    }
    return arm;
}

}  // namespace

FixtureKind fixture_kind_from_string(const std::string& s) {
    if (s == "rigid_orbit") return FixtureKind::RigidOrbit;
    if (s == "articulated_arm") return FixtureKind::ArticulatedArm;
    if (s == "occlusion_pair") return FixtureKind::OcclusionPair;
    if (s == "full_scene") return FixtureKind::FullScene;
    throw Error("unknown fixture kind '" + s + "'");
}

OrbitParams rigid_orbit_params() { return OrbitParams{}; }

RigidTransform rigid_orbit_gt_transform(int frame) {
    const OrbitParams p = rigid_orbit_params();
    const Vec3 orbit_center(0, 0, 1.8);
    const double angle = p.deg_per_frame * kPi / 180.0 * frame;

    // rotation about the vertical axis through the orbit center, plus a
    // constant-velocity drift along y; identity at the canonical frame 0
    RigidTransform T;
    T.R = rot_y(angle);
    T.t = orbit_center - T.R * orbit_center + Vec3(0, p.meters_per_frame * frame, 0);
    return T;
}

std::string make_fixture(FixtureKind kind, const std::string& out_dir, std::uint64_t seed) {
    switch (kind) {
        case FixtureKind::RigidOrbit: {
            const Camera cam = fixture_camera(224, 160, 320.0);
            std::vector<FixtureObject> objects{orbit_cube()};
            return emit_fixture(out_dir, cam, objects, seed);
        }
        case FixtureKind::ArticulatedArm: {
            const Camera cam = fixture_camera(192, 160, 260.0);
            ArmFixture arm = make_arm(Vec3(-0.1, -0.35, 1.6), 8, 40.0 * kPi / 180.0);
            FixtureObject obj;
            obj.id = "arm";
            obj.cls = ObjectClass::Articulated;
            obj.canonical_mesh = arm.canonical_mesh;
            obj.frame_meshes = arm.frame_meshes;
            obj.rig_path = "arm_rig.json";
            obj.pose_path = "arm_poses.json";
            fs::create_directories(out_dir);
            save_rig(arm.rig, out_dir + "/arm_rig.json");
            save_poses(arm.poses, out_dir + "/arm_poses.json");
            std::vector<FixtureObject> objects{std::move(obj)};
            return emit_fixture(out_dir, cam, objects, seed);
        }
        case FixtureKind::OcclusionPair: {
            const Camera cam = fixture_camera(192, 144, 260.0);
            const int n_frames = 7;

            FixtureObject blocker;
            blocker.id = "blocker";
            blocker.cls = ObjectClass::Static;
            const TriMesh big = tilted(make_box(Vec3(0, 0, 1.4), Vec3(0.45, 0.45, 0.2), 8,
                                                Vec3(0.3, 0.35, 0.8)),
                                       20.0, 25.0);
            blocker.frame_meshes.assign(n_frames, big);
            blocker.canonical_mesh = centered(big);

            FixtureObject mover;
            mover.id = "mover";
            mover.cls = ObjectClass::Rigid;
            const TriMesh small = tilted(make_box(Vec3::Zero(), Vec3::Constant(0.2), 6,
                                                  Vec3(0.9, 0.7, 0.1)),
                                         30.0, 40.0);
            for (int t = 0; t < n_frames; ++t) {
                // passes behind the blocker; middle frames fully hidden
                RigidTransform T;
                T.t = Vec3(-0.55 + 0.18 * t, 0.0, 2.1);
                mover.frame_meshes.push_back(apply_transform(T, small));
            }
            mover.canonical_mesh = centered(mover.frame_meshes[0]);

            std::vector<FixtureObject> objects{std::move(blocker), std::move(mover)};
            return emit_fixture(out_dir, cam, objects, seed);
        }
        case FixtureKind::FullScene:
        default: {
            const Camera cam = fixture_camera(224, 160, 260.0);
            const int n_frames = 5;

            FixtureObject floor;
            floor.id = "floor";
            floor.cls = ObjectClass::Static;
            const TriMesh slab = make_box(Vec3(0, -0.5, 1.9), Vec3(1.4, 0.12, 0.9), 10,
                                          Vec3(0.55, 0.52, 0.5));
            floor.frame_meshes.assign(n_frames, slab);
            floor.canonical_mesh = centered(slab);

            FixtureObject pillar;
            pillar.id = "pillar";
            pillar.cls = ObjectClass::Static;
            const TriMesh tall = tilted(make_box(Vec3(0.48, -0.12, 2.1), Vec3(0.2, 0.6, 0.2), 8,
                                                 Vec3(0.4, 0.42, 0.45)),
                                        18.0, 28.0);
            pillar.frame_meshes.assign(n_frames, tall);
            pillar.canonical_mesh = centered(tall);

            FixtureObject cube;
            cube.id = "cube";
            cube.cls = ObjectClass::Rigid;
            const TriMesh box = tilted(make_box(Vec3::Zero(), Vec3::Constant(0.22), 7,
                                                Vec3(0.85, 0.2, 0.2)),
                                       30.0, 40.0);
            for (int t = 0; t < n_frames; ++t) {
                RigidTransform T;
                T.R = rot_y(4.0 * kPi / 180.0 * t);
                T.t = Vec3(-0.35 + 0.03 * t, -0.28, 1.7);
                cube.frame_meshes.push_back(apply_transform(T, box));
            }
            cube.canonical_mesh = centered(cube.frame_meshes[0]);

            ArmFixture arm = make_arm(Vec3(0.05, -0.4, 1.55), n_frames, 30.0 * kPi / 180.0);
            FixtureObject arm_obj;
            arm_obj.id = "arm";
            arm_obj.cls = ObjectClass::Articulated;
            arm_obj.canonical_mesh = arm.canonical_mesh;
            arm_obj.frame_meshes = arm.frame_meshes;
            arm_obj.rig_path = "arm_rig.json";
            arm_obj.pose_path = "arm_poses.json";
            fs::create_directories(out_dir);
            save_rig(arm.rig, out_dir + "/arm_rig.json");
            save_poses(arm.poses, out_dir + "/arm_poses.json");

            std::vector<FixtureObject> objects{std::move(floor), std::move(pillar),
                                               std::move(cube), std::move(arm_obj)};
            return emit_fixture(out_dir, cam, objects, seed);
        }
    }
}

}  // namespace adsr
