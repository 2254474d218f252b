// End-to-end acceptance checks. Each check prints one [PASS]/[FAIL] line;
// the process exits 0 only when every check passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "adsr/fixtures.hpp"
#include "adsr/icp.hpp"
#include "adsr/lbs.hpp"
#include "adsr/log.hpp"
#include "adsr/losses.hpp"
#include "adsr/manifest.hpp"
#include "adsr/mesh_io.hpp"
#include "adsr/metrics.hpp"
#include "adsr/pipeline.hpp"
#include "adsr/refine.hpp"
#include "adsr/splats.hpp"

using namespace adsr;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

// Whole-scene chamfer (meters) of the full_scene fixture after the standard
// deform/track/evaluate run with static-scene alignment, seed 7, 5000
// samples per mesh. Frozen from the first green run; the regression check
// below asserts the pipeline stays at or under it.
constexpr double kWholeSceneChamferBaseline = 0.0075;

fs::path g_root;

std::string fixture_dir(FixtureKind kind, const char* name) {
    fs::path dir = g_root / name;
    if (!fs::exists(dir / "manifest.json")) make_fixture(kind, dir.string(), 7);
    return (dir / "manifest.json").string();
}

// ---------------------------------------------------------------------------
// 1. Compositing: the rasterizer against an independent per-pixel fold.

GaussianSet random_scene(std::mt19937_64& rng, int max_splats) {
    std::uniform_real_distribution<double> u(0, 1);
    const int n = 1 + int(u(rng) * (max_splats - 1));
    GaussianSet g;
    for (int i = 0; i < n; ++i) {
        g.means.push_back(Vec3(0.8 * (u(rng) - 0.5), 0.8 * (u(rng) - 0.5), 0.8 + 1.2 * u(rng)));
        g.scales.push_back(Vec3(0.01 + 0.07 * u(rng), 0.01 + 0.07 * u(rng),
                                0.01 + 0.07 * u(rng)));
        std::normal_distribution<double> nd;
        g.orientations.push_back(axis_angle_to_matrix(Vec3(nd(rng), nd(rng), nd(rng))));
        g.opacities.push_back(0.05 + 0.9 * u(rng));
        g.colors.push_back(Vec3(u(rng), u(rng), u(rng)));
    }
    return g;
}

/// Brute-force reimplementation of the documented compositing semantics:
/// global front-to-back order by (depth, index), 3-sigma Mahalanobis cutoff,
/// alpha clamp 0.999, transmittance early-out at 1e-4, unnormalized
/// alpha-weighted depth. Written against the interface contract, not the
/// renderer's code.
void oracle_render(const GaussianSet& g, const Camera& cam, ImageRGB* color,
                   DepthGrid* depth, Grid<float>* alpha) {
    struct S {
        Eigen::Vector2d mu;
        Eigen::Matrix2d ic;
        double z, op;
        Eigen::Vector3f col;
        int idx;
    };
    std::vector<S> splats;
    for (std::size_t i = 0; i < g.size(); ++i) {
        ProjectedSplat p = project_gaussian(g.means[i], g.scales[i], g.orientations[i], cam);
        if (p.culled || !(p.cov.determinant() > 0) || !p.cov.allFinite()) continue;
        splats.push_back({p.mean, p.cov.inverse(), p.z, g.opacities[i],
                          g.colors[i].cast<float>(), int(i)});
    }
    std::sort(splats.begin(), splats.end(),
              [](const S& a, const S& b) { return a.z != b.z ? a.z < b.z : a.idx < b.idx; });

    *color = ImageRGB(cam.width, cam.height);
    *depth = DepthGrid(cam.width, cam.height, 0.0f);
    *alpha = Grid<float>(cam.width, cam.height, 0.0f);
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            double T = 1.0;
            Eigen::Vector3f c = Eigen::Vector3f::Zero();
            double d = 0.0;
            for (const S& s : splats) {
                Eigen::Vector2d off(x - s.mu.x(), y - s.mu.y());
                double maha = off.dot(s.ic * off);
                if (maha > 9.0) continue;
                double a = std::min(s.op * std::exp(-0.5 * maha), 0.999);
                double w = T * a;
                c += float(w) * s.col;
                d += w * s.z;
                T *= 1.0 - a;
                if (T < 1e-4) break;
            }
            color->at(x, y) = c;
            depth->at(x, y) = float(d);
            alpha->at(x, y) = float(1.0 - T);
        }
}

bool check_compositing() {
    Camera cam;
    cam.width = cam.height = 32;
    cam.fx = cam.fy = 40.0;
    cam.cx = cam.cy = 16.0;

    double worst = 0;
    for (int scene = 0; scene < 50; ++scene) {
        std::mt19937_64 rng(1000 + scene);
        GaussianSet g = random_scene(rng, 100);
        RenderOutput lib = rasterize(g, cam);
        ImageRGB oc;
        DepthGrid od;
        Grid<float> oa;
        oracle_render(g, cam, &oc, &od, &oa);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) {
                worst = std::max<double>(worst,
                                         (lib.color.at(x, y) - oc.at(x, y)).cwiseAbs().maxCoeff());
                worst = std::max<double>(worst, std::abs(lib.depth.at(x, y) - od.at(x, y)));
                worst = std::max<double>(worst, std::abs(lib.alpha.at(x, y) - oa.at(x, y)));
            }
    }
    std::printf("    max deviation from per-pixel fold: %.3g\n", worst);
    return worst <= 1e-6;
}

// ---------------------------------------------------------------------------
// 2. Gradients: on a self-consistent target the loss at the optimum is zero,
// the finite-difference optimizer holds it below 1e-6, and the gradient's
// translation component points back toward the optimum when perturbed.

bool check_gradients() {
    Camera cam;
    cam.width = cam.height = 32;
    cam.fx = cam.fy = 40.0;
    cam.cx = cam.cy = 16.0;

    double worst_loss = 0, worst_driven = 0;
    int sign_checks = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::mt19937_64 rng(2000 + trial);
        GaussianSet g = random_scene(rng, 20);
        std::vector<int> ids(g.size(), 1);
        RenderOutput gt = rasterize(g, cam, &ids);
        bool any_mask = false;
        for (auto m : gt.object_id.data) any_mask |= (m != 0);
        if (!any_mask) continue;

        FrameObservation obs;
        obs.rgb = gt.color;
        obs.depth = gt.depth;
        obs.mask = gt.object_id;
        obs.camera = cam;

        std::vector<SceneObject> scene(1);
        scene[0].id = "obj";
        scene[0].mask_id = 1;
        scene[0].splats = g;
        std::vector<CorrectivePose> poses(1);
        poses[0].pivot = g.centroid();

        worst_loss = std::max(worst_loss, scene_loss(scene, poses, obs, LossWeights{}));

        // The finite-difference optimizer must keep the loss at the optimum
        // below 1e-6 (best-seen poses are returned).
        RefineConfig config;
        config.iterations = 10;
        RefineResult res = refine_frame(scene, obs, config);
        worst_driven = std::max(worst_driven, res.best_total_loss);

        // Perturbing the pose along +x must produce a positive x-translation
        // gradient (descent opposes the perturbation).
        std::vector<CorrectivePose> shifted = poses;
        shifted[0].delta_translation = Vec3(0.02, 0, 0);
        Eigen::Matrix<double, 6, 1> grad =
            pose_gradient(scene, 0, shifted, obs, LossWeights{}, 1e-4);
        if (grad(3) > 0) ++sign_checks;
    }
    std::printf("    loss at optimum <= %.3g, after descent <= %.3g, %d/20 sign checks\n",
                worst_loss, worst_driven, sign_checks);
    // A few sparse random scenes have locally non-monotone landscapes, so
    // the direction check is a strong majority, not unanimity.
    return worst_loss < 1e-6 && worst_driven < 1e-6 && sign_checks >= 16;
}

// ---------------------------------------------------------------------------
// 3. Pose recovery from a rendered target.

struct PoseScene {
    std::vector<SceneObject> scene;
    FrameObservation obs;
    GaussianSet gt_splats;
};

PoseScene make_pose_scene() {
    std::string manifest = fixture_dir(FixtureKind::RigidOrbit, "rigid_orbit");
    SceneManifest m = load_manifest(manifest);
    TriMesh mesh = load_mesh(m.resolve(m.objects[0].mesh_path));
    RigidTransform place;
    place.t = Vec3(0, 0, 1.2);
    mesh = apply_transform(place, mesh);

    Camera cam;
    cam.width = cam.height = 128;
    cam.fx = cam.fy = 150.0;
    cam.cx = cam.cy = 64.0;

    PoseScene ps;
    ps.gt_splats = init_gaussians_from_mesh(mesh);
    std::vector<int> ids(ps.gt_splats.size(), 1);
    RenderOutput gt = rasterize(ps.gt_splats, cam, &ids);
    ps.obs.rgb = gt.color;
    ps.obs.depth = gt.depth;
    ps.obs.mask = gt.object_id;
    ps.obs.camera = cam;
    ps.scene.resize(1);
    ps.scene[0].id = "cube";
    ps.scene[0].mask_id = 1;
    return ps;
}

bool check_pose_recovery() {
    PoseScene ps = make_pose_scene();
    const Vec3 pivot = ps.gt_splats.centroid();
    RefineConfig config;  // 200 iterations

    // Part 1: combined 5 degree / 0.05 m perturbation.
    CorrectivePose pert;
    pert.pivot = pivot;
    pert.delta_rotation = 5.0 * kDeg * Vec3(0.4, 0.7, 0.59).normalized();
    pert.delta_translation = 0.05 * Vec3(0.6, -0.5, 0.62).normalized();
    ps.scene[0].splats = apply_corrective(ps.gt_splats, pert);

    RefineResult res = refine_frame(ps.scene, ps.obs, config);
    RigidTransform net = compose(res.poses.at("cube").to_rigid(), pert.to_rigid());
    double rot_err = rotation_angle_between(net.R, Mat3::Identity()) / kDeg;
    double trans_err = (net.apply(pivot) - pivot).norm();
    std::printf("    combined: residual %.4f deg / %.5f m\n", rot_err, trans_err);
    if (rot_err > 1.0 || trans_err > 0.01) return false;

    // Part 2: depth-only 0.05 m offset with 60% of the object occluded.
    CorrectivePose pert_z;
    pert_z.pivot = pivot;
    pert_z.delta_translation = Vec3(0, 0, 0.05);
    ps.scene[0].splats = apply_corrective(ps.gt_splats, pert_z);

    FrameObservation occluded = ps.obs;
    std::vector<int> xs;
    for (int y = 0; y < occluded.mask.height; ++y)
        for (int x = 0; x < occluded.mask.width; ++x)
            if (occluded.mask.at(x, y) == 1) xs.push_back(x);
    std::sort(xs.begin(), xs.end());
    int cutoff = xs[std::size_t(xs.size() * 0.6)];
    for (int y = 0; y < occluded.mask.height; ++y)
        for (int x = 0; x < occluded.mask.width; ++x)
            if (occluded.mask.at(x, y) == 1 && x < cutoff) occluded.mask.at(x, y) = 0;

    RefineResult res_z = refine_frame(ps.scene, occluded, config);
    RigidTransform net_z = compose(res_z.poses.at("cube").to_rigid(), pert_z.to_rigid());
    double depth_err = (net_z.apply(pivot) - pivot).norm();
    std::printf("    depth-only occluded: residual %.5f m\n", depth_err);
    return depth_err <= 0.02;
}

// ---------------------------------------------------------------------------
// 4. Rigid tracking on the orbit fixture.

bool check_rigid_tracking() {
    std::string manifest = fixture_dir(FixtureKind::RigidOrbit, "rigid_orbit");
    SceneManifest m = load_manifest(manifest);

    std::vector<PointCloud> clouds;
    for (const auto& f : m.frames) {
        DepthGrid depth = load_depth(m.resolve(f.depth_path));
        MaskGrid mask = load_mask_png(m.resolve(f.mask_path));
        PointCloud c = backproject_depth(depth, mask, f.camera, 1);
        estimate_normals(c, 16, f.camera.cam_to_world(Vec3::Zero()));
        clouds.push_back(std::move(c));
    }

    TrackResult res = chain_track(clouds, 0, IcpParams{});
    const Vec3 c0 = clouds[0].centroid();
    const double diameter = rigid_orbit_params().cube_edge * std::sqrt(3.0);
    double worst_rot = 0, worst_trans = 0;
    for (std::size_t t = 0; t < clouds.size(); ++t) {
        RigidTransform rel =
            compose(rigid_orbit_gt_transform(int(t)), rigid_orbit_gt_transform(0).inverse());
        worst_rot = std::max(worst_rot, rotation_angle_between(res.transforms[t].R, rel.R) / kDeg);
        worst_trans = std::max(worst_trans, (res.transforms[t].apply(c0) - rel.apply(c0)).norm());
    }
    std::printf("    max error %.4f deg / %.5f m (limits 0.5 deg / %.5f m)\n", worst_rot,
                worst_trans, 0.01 * diameter);
    return worst_rot <= 0.5 && worst_trans <= 0.01 * diameter;
}

// ---------------------------------------------------------------------------
// 5. Skinning rebase against a scripted two-bone evaluation.

bool check_skinning_rebase() {
    std::string manifest = fixture_dir(FixtureKind::ArticulatedArm, "articulated_arm");
    SceneManifest m = load_manifest(manifest);
    const ObjectEntry* arm = m.find_object("arm");
    TriMesh gen = load_mesh(m.resolve(arm->mesh_path));
    SkinnedRig rig = load_rig(m.resolve(arm->rig_path));
    std::vector<PoseParams> poses = load_poses(m.resolve(arm->pose_path));
    const int n = int(poses.size());

    // Scripted per-vertex affine map for this rig: bone 0 fixed, bone 1
    // rotates about z at the elbow. Blend of the two bone maps per vertex.
    const Vec3 elbow = rig.rest_transforms[1].topRightCorner<3, 1>();
    auto affine = [&](std::size_t v, double theta, Mat3* A, Vec3* b) {
        double w1 = 0;
        for (const auto& [bone, w] : rig.weights[v])
            if (bone == 1) w1 = w;
        Mat3 Rz = Mat3::Identity();
        Rz(0, 0) = std::cos(theta), Rz(0, 1) = -std::sin(theta);
        Rz(1, 0) = std::sin(theta), Rz(1, 1) = std::cos(theta);
        *A = (1.0 - w1) * Mat3::Identity() + w1 * Rz;
        *b = w1 * (elbow - Rz * elbow);
    };
    auto theta_of = [&](int t) { return poses[t].joint_rotations[1].z(); };

    // (a) Sequence from the canonical frame, checked against the script.
    auto frames = deform_sequence(gen, rig.weights, rig, poses, arm->canonical_frame);
    double worst = 0;
    const double theta_c = theta_of(arm->canonical_frame);
    for (int t = 0; t < n; ++t) {
        for (std::size_t v = 0; v < gen.vertices.size(); ++v) {
            Mat3 Ac, At;
            Vec3 bc, bt;
            affine(v, theta_c, &Ac, &bc);
            affine(v, theta_of(t), &At, &bt);
            Vec3 expected = At * (Ac.inverse() * (gen.vertices[v] - bc)) + bt;
            worst = std::max(worst, (frames[t].vertices[v] - expected).norm());
        }
    }
    std::printf("    scripted-evaluation deviation: %.3g\n", worst);
    if (worst > 1e-9) return false;

    // (b) Rebasing from the last frame back through the sequence.
    auto frames_back = deform_sequence(frames[n - 1], rig.weights, rig, poses, n - 1);
    double worst_rt = 0;
    for (int t = 0; t < n; ++t)
        for (std::size_t v = 0; v < gen.vertices.size(); ++v)
            worst_rt = std::max(worst_rt,
                                (frames_back[t].vertices[v] - frames[t].vertices[v]).norm());
    std::printf("    round-trip deviation: %.3g\n", worst_rt);
    if (worst_rt > 1e-9) return false;

    // (c) Identity canonical transforms reduce rebasing to plain skinning.
    BoneTransforms B_d = compute_bone_transforms(rig, poses[n - 1]);
    BoneTransforms B_id(rig.n_b, Mat4::Identity());
    auto rebased = rebase_canonical(gen.vertices, rig.weights, B_id, B_d);
    auto plain = lbs_apply(gen.vertices, rig.weights, B_d);
    double worst_id = 0;
    for (std::size_t v = 0; v < gen.vertices.size(); ++v)
        worst_id = std::max(worst_id, (rebased[v] - plain[v]).norm());
    return worst_id <= 1e-9;
}

// ---------------------------------------------------------------------------
// 6. Metrics against an exhaustive all-pairs evaluation.

bool check_metrics() {
    auto brute = [](const PointCloud& pred, const PointCloud& gt, double tau, MetricReport* r) {
        auto one_way = [&](const std::vector<Vec3>& from, const std::vector<Vec3>& to,
                           double* mean_out) {
            double sum = 0;
            std::size_t within = 0;
            for (const Vec3& p : from) {
                double best = std::numeric_limits<double>::infinity();
                for (const Vec3& q : to) best = std::min(best, (p - q).norm());
                sum += best;
                if (best <= tau) ++within;
            }
            *mean_out = sum / double(from.size());
            return double(within) / double(from.size());
        };
        double prec = one_way(pred.points, gt.points, &r->dist_acc);
        double rec = one_way(gt.points, pred.points, &r->completeness);
        r->f_score = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        r->chamfer = 0.5 * (r->dist_acc + r->completeness);
    };

    double worst = 0;
    for (int trial = 0; trial < 5; ++trial) {
        std::mt19937_64 rng(3000 + trial);
        std::uniform_real_distribution<double> u(-1, 1);
        PointCloud pred, gt;
        for (int i = 0; i < 1500; ++i) pred.points.push_back(Vec3(u(rng), u(rng), u(rng)));
        for (int i = 0; i < 2000; ++i) gt.points.push_back(Vec3(u(rng), u(rng), u(rng)));
        EvalProtocol protocol;
        protocol.tau = 0.1;
        MetricReport lib = evaluate(pred, gt, protocol);
        MetricReport ora;
        brute(pred, gt, protocol.tau, &ora);
        worst = std::max({worst, std::abs(lib.dist_acc - ora.dist_acc),
                          std::abs(lib.completeness - ora.completeness),
                          std::abs(lib.f_score - ora.f_score),
                          std::abs(lib.chamfer - ora.chamfer)});
    }
    std::printf("    all-pairs deviation: %.3g\n", worst);
    if (worst > 1e-12) return false;

    // Identical input: perfect score, exactly.
    PointCloud self;
    std::mt19937_64 rng(3100);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 800; ++i) self.points.push_back(Vec3(u(rng), u(rng), u(rng)));
    MetricReport rs = evaluate(self, self, EvalProtocol{});
    if (rs.chamfer != 0.0 || rs.f_score != 1.0) return false;

    // Planar grids offset by exactly 0.05 in x: both distances equal 0.05.
    PointCloud a, b;
    for (int j = 0; j < 16; ++j)
        for (int k = 0; k < 16; ++k) {
            a.points.push_back(Vec3(0.0, j * 0.2, k * 0.2));
            b.points.push_back(Vec3(0.05, j * 0.2, k * 0.2));
        }
    MetricReport rg = evaluate(b, a, EvalProtocol{});
    std::printf("    grid dist_acc %.17g, completeness %.17g\n", rg.dist_acc, rg.completeness);
    return std::abs(rg.dist_acc - 0.05) <= 1e-12 && std::abs(rg.completeness - 0.05) <= 1e-12;
}

// ---------------------------------------------------------------------------
// 7. Whole-scene alignment and the frozen pipeline baseline.

std::vector<SceneObjectMesh> load_gt_scene(const SceneManifest& m, int frame) {
    std::vector<SceneObjectMesh> scene;
    for (const auto& o : m.objects) {
        SceneObjectMesh s;
        s.id = o.id;
        s.cls = o.cls;
        s.mesh = load_mesh(m.resolve(m.ground_truth.at(o.id)[frame]));
        scene.push_back(std::move(s));
    }
    return scene;
}

bool check_scene_alignment() {
    std::string manifest = fixture_dir(FixtureKind::FullScene, "full_scene");
    SceneManifest m = load_manifest(manifest);
    auto gt_scene = load_gt_scene(m, 0);

    // Global 10 degree + 0.1 m offset about the static centroid.
    Vec3 center = Vec3::Zero();
    int n_static = 0;
    for (const auto& o : gt_scene)
        if (o.cls == ObjectClass::Static) {
            center += o.mesh.centroid();
            ++n_static;
        }
    center /= n_static;
    RigidTransform off;
    off.R = axis_angle_to_matrix(10.0 * kDeg * Vec3(0.2, 1.0, 0.3).normalized());
    off.t = center - off.R * center + 0.1 * Vec3(0.5, -0.3, 0.81).normalized();

    std::vector<SceneObjectMesh> pred;
    for (const auto& o : gt_scene) pred.push_back({o.id, apply_transform(off, o.mesh), o.cls});

    EvalProtocol protocol;
    protocol.samples_per_mesh = 20000;
    protocol.seed = 7;
    RigidTransform fix = align_scene_by_static(pred, gt_scene, protocol);
    RigidTransform expected = off.inverse();
    double rot_err = rotation_angle_between(fix.R, expected.R) / kDeg;
    double trans_err = (fix.t - expected.t).norm();
    std::printf("    offset recovery: %.5f deg / %.6f m\n", rot_err, trans_err);
    if (rot_err > 0.1 || trans_err > 0.001) return false;

    // Pipeline regression: whole-scene chamfer at or under the baseline.
    PipelineConfig cfg;
    cfg.manifest_path = manifest;
    cfg.output_dir = (g_root / "baseline_run").string();
    cfg.stages = {Stage::Deform, Stage::Track, Stage::Evaluate};
    cfg.protocol.align_mode = AlignMode::StaticSceneIcp;
    cfg.protocol.samples_per_mesh = 5000;
    cfg.threads = 1;
    if (run_pipeline(cfg) != 0) return false;

    std::ifstream in((g_root / "baseline_run" / "report.json").string());
    nlohmann::json rep = nlohmann::json::parse(in);
    double whole = -1;
    for (const auto& row : rep)
        if (row.at("id") == "whole") whole = row.at("chamfer").get<double>();
    std::printf("    whole-scene chamfer %.6f (baseline %.6f)\n", whole,
                kWholeSceneChamferBaseline);
    return whole >= 0 && whole <= kWholeSceneChamferBaseline;
}

// ---------------------------------------------------------------------------
// 8. Refinement improves a noisy track.

bool check_refinement_ablation() {
    std::string manifest = fixture_dir(FixtureKind::FullScene, "full_scene");
    SceneManifest m = load_manifest(manifest);
    const int frame = 2;
    auto gt_scene = load_gt_scene(m, frame);

    // Self-consistent observation rendered from the ground-truth splats.
    std::vector<SceneObject> scene;
    GaussianSet all;
    std::vector<int> ids;
    for (std::size_t i = 0; i < gt_scene.size(); ++i) {
        SceneObject o;
        o.id = gt_scene[i].id;
        o.mask_id = int(i) + 1;
        o.splats = init_gaussians_from_mesh(gt_scene[i].mesh);
        ids.insert(ids.end(), o.splats.size(), o.mask_id);
        all.append(o.splats);
        scene.push_back(std::move(o));
    }
    RenderOutput gt_render = rasterize(all, m.frames[frame].camera, &ids);
    FrameObservation obs;
    obs.rgb = gt_render.color;
    obs.depth = gt_render.depth;
    obs.mask = gt_render.object_id;
    obs.camera = m.frames[frame].camera;

    // Inject 2 degree / 0.02 m tracking noise per object.
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    std::vector<SceneObjectMesh> noisy_meshes;
    std::vector<RigidTransform> noise(scene.size());
    for (std::size_t i = 0; i < scene.size(); ++i) {
        CorrectivePose p;
        p.pivot = scene[i].splats.centroid();
        p.delta_rotation = 2.0 * kDeg * Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        p.delta_translation = 0.02 * Vec3(nd(rng), nd(rng), nd(rng)).normalized();
        noise[i] = p.to_rigid();
        scene[i].splats = apply_corrective(scene[i].splats, p);
        noisy_meshes.push_back({gt_scene[i].id, apply_transform(noise[i], gt_scene[i].mesh),
                                gt_scene[i].cls});
    }

    EvalProtocol protocol;
    protocol.samples_per_mesh = 5000;
    protocol.seed = 7;
    double pre = evaluate_split(noisy_meshes, gt_scene, EvalSplit::Whole, protocol).chamfer;

    RefineConfig config;
    config.iterations = 60;
    RefineResult res = refine_frame(scene, obs, config);

    std::vector<SceneObjectMesh> refined;
    for (std::size_t i = 0; i < scene.size(); ++i)
        refined.push_back({noisy_meshes[i].id,
                           apply_transform(res.poses.at(scene[i].id).to_rigid(),
                                           noisy_meshes[i].mesh),
                           noisy_meshes[i].cls});
    double post = evaluate_split(refined, gt_scene, EvalSplit::Whole, protocol).chamfer;
    std::printf("    whole-scene chamfer %.6f -> %.6f\n", pre, post);
    return post < pre;
}

// ---------------------------------------------------------------------------
// 9. Single-threaded determinism of the full pipeline.

bool check_determinism() {
    std::string manifest = fixture_dir(FixtureKind::FullScene, "full_scene");
    auto run = [&](const char* name) {
        PipelineConfig cfg;
        cfg.manifest_path = manifest;
        cfg.output_dir = (g_root / name).string();
        cfg.refine.iterations = 3;
        cfg.protocol.samples_per_mesh = 3000;
        cfg.threads = 1;
        return run_pipeline(cfg);
    };
    if (run("det_a") != 0 || run("det_b") != 0) return false;

    for (const char* file : {"report.csv", "report.json"}) {
        std::ifstream a((g_root / "det_a" / file).string(), std::ios::binary);
        std::ifstream b((g_root / "det_b" / file).string(), std::ios::binary);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        if (sa.str().empty() || sa.str() != sb.str()) {
            std::printf("    %s differs between runs\n", file);
            return false;
        }
    }
    return true;
}

}  // namespace

int main() {
    g_root = fs::temp_directory_path() / "adsr_acceptance";
    fs::remove_all(g_root);
    fs::create_directories(g_root);
    set_log_level(LogLevel::Error);

    struct Criterion {
        const char* name;
        std::function<bool()> fn;
    };
    const std::vector<Criterion> criteria = {
        {"compositing_oracle", check_compositing},
        {"gradient_check", check_gradients},
        {"pose_recovery", check_pose_recovery},
        {"rigid_tracking", check_rigid_tracking},
        {"skinning_rebase", check_skinning_rebase},
        {"metrics_oracle", check_metrics},
        {"scene_alignment", check_scene_alignment},
        {"refinement_ablation", check_refinement_ablation},
        {"determinism", check_determinism},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::printf("    exception: %s\n", e.what());
        }
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s (%.1fs)\n", ok ? "PASS" : "FAIL", c.name, sec);
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
