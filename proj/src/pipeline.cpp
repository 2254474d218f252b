#include "adsr/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "adsr/error.hpp"
#include "adsr/lbs.hpp"
#include "adsr/log.hpp"
#include "adsr/mesh_io.hpp"
#include "adsr/splats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace adsr {

Stage stage_from_string(const std::string& s) {
    if (s == "deform") return Stage::Deform;
    if (s == "track") return Stage::Track;
    if (s == "refine") return Stage::Refine;
    if (s == "evaluate") return Stage::Evaluate;
    if (s == "export") return Stage::Export;
    if (s == "render") return Stage::Render;
    throw Error("unknown stage '" + s + "'");
}

std::string to_string(Stage s) {
    switch (s) {
        case Stage::Deform: return "deform";
        case Stage::Track: return "track";
        case Stage::Refine: return "refine";
        case Stage::Evaluate: return "evaluate";
        case Stage::Export: return "export";
        default: return "render";
    }
}

void PipelineConfig::check_valid() const {
    if (stages.empty()) throw Error("config: stages must be non-empty");
    if (manifest_path.empty()) throw Error("config: manifest_path required");
    if (output_dir.empty()) throw Error("config: output_dir required");
    if (threads < 0) throw Error("config: threads must be >= 0");
    if (refine.iterations <= 0) throw Error("config: refine iterations must be positive");
    icp.check_valid();
    protocol.check_valid();
}

bool ValidationReport::ok() const { return error_count() == 0; }

int ValidationReport::error_count() const {
    int n = 0;
    for (const auto& i : issues)
        if (i.severity == ValidationIssue::Severity::ErrorLevel) ++n;
    return n;
}

int ValidationReport::warning_count() const {
    return static_cast<int>(issues.size()) - error_count();
}

ValidationReport validate_manifest(const std::string& manifest_path) {
    ValidationReport report;
    auto error = [&](const std::string& m) {
        report.issues.push_back({ValidationIssue::Severity::ErrorLevel, m});
    };
    auto warning = [&](const std::string& m) {
        report.issues.push_back({ValidationIssue::Severity::Warning, m});
    };

    SceneManifest m;
    try {
        m = load_manifest(manifest_path);
    } catch (const Error& e) {
        error(e.what());
        return report;
    }

    auto require = [&](const std::string& rel, const std::string& what) {
        const std::string p = m.resolve(rel);
        if (!fs::exists(p)) error("missing " + what + ": " + p);
        return fs::exists(p);
    };

    for (const auto& o : m.objects) {
        require(o.mesh_path, "mesh for object '" + o.id + "'");
        if (o.cls == ObjectClass::Articulated) {
            require(o.rig_path, "rig for object '" + o.id + "'");
            if (o.pose_path.empty()) {
                error("articulated object '" + o.id + "' lacks pose_path");
            } else if (require(o.pose_path, "poses for object '" + o.id + "'")) {
                try {
                    const auto poses = load_poses(m.resolve(o.pose_path));
                    if (poses.size() != m.frames.size())
                        error("object '" + o.id + "' has " + std::to_string(poses.size()) +
                              " poses for " + std::to_string(m.frames.size()) + " frames");
                } catch (const Error& e) {
                    error(e.what());
                }
            }
            if (!o.ref_mesh_path.empty()) require(o.ref_mesh_path, "reference mesh");
        }
    }

    for (std::size_t t = 0; t < m.frames.size(); ++t) {
        const auto& fr = m.frames[t];
        const std::string tag = "frame " + std::to_string(t);
        try {
            fr.camera.check_valid();
        } catch (const Error& e) {
            error(tag + ": " + e.what());
        }
        if (require(fr.depth_path, tag + " depth file")) {
            try {
                const DepthGrid d = load_depth(m.resolve(fr.depth_path));
                if (d.width != fr.camera.width || d.height != fr.camera.height)
                    error(tag + ": depth raster " + std::to_string(d.width) + "x" +
                          std::to_string(d.height) + " does not match camera " +
                          std::to_string(fr.camera.width) + "x" +
                          std::to_string(fr.camera.height));
            } catch (const Error& e) {
                error(e.what());
            }
        }
        if (require(fr.mask_path, tag + " mask file")) {
            try {
                const MaskGrid mask = load_mask_png(m.resolve(fr.mask_path));
                if (mask.width != fr.camera.width || mask.height != fr.camera.height)
                    error(tag + ": mask size does not match camera raster");
            } catch (const Error& e) {
                error(e.what());
            }
        }
        if (!fr.rgb_path.empty()) require(fr.rgb_path, tag + " rgb file");
    }

    for (const auto& [id, paths] : m.ground_truth)
        for (const auto& p : paths) require(p, "ground-truth mesh for '" + id + "'");

    // canonical-frame visibility heuristic
    constexpr int kVisibilityThreshold = 500;
    for (const auto& o : m.objects) {
        if (o.canonical_frame >= static_cast<int>(m.frames.size())) continue;
        const std::string mp = m.resolve(m.frames[o.canonical_frame].mask_path);
        if (!fs::exists(mp)) continue;
        try {
            const MaskGrid mask = load_mask_png(mp);
            const int id = m.mask_id_of(o.id);
            int count = 0;
            for (const auto v : mask.data)
                if (v == id) ++count;
            if (count <= kVisibilityThreshold)
                warning("object '" + o.id + "' has only " + std::to_string(count) +
                        " mask pixels at canonical frame " + std::to_string(o.canonical_frame));
        } catch (const Error&) {
            // already reported above
        }
    }
    return report;
}

namespace {

struct ObjectState {
    ObjectEntry entry;
    int mask_id = 0;
    TriMesh canonical;
    std::vector<TriMesh> placed;  // per frame, scene space
    std::vector<bool> frame_flags;  // unconverged / occluded markers
    bool has_placed = false;
};

TriMesh load_scaled_mesh(const std::string& path, double unit_scale) {
    TriMesh m = load_mesh(path);
    if (unit_scale != 1.0)
        for (auto& v : m.vertices) v *= unit_scale;
    return m;
}

class PipelineRun {
public:
    PipelineRun(const PipelineConfig& config, const SceneManifest& manifest)
        : config_(config), manifest_(manifest) {
        for (const auto& e : manifest.objects) {
            ObjectState s;
            s.entry = e;
            s.mask_id = manifest.mask_id_of(e.id);
            s.canonical = load_scaled_mesh(manifest.resolve(e.mesh_path), manifest.unit_scale);
            s.frame_flags.assign(manifest.frames.size(), false);
            objects_.push_back(std::move(s));
        }
    }

    void deform() {
        for (auto& obj : objects_) {
            if (obj.entry.cls != ObjectClass::Articulated) continue;
            const SkinnedRig rig = load_rig(manifest_.resolve(obj.entry.rig_path));
            const auto poses = load_poses(manifest_.resolve(obj.entry.pose_path));
            if (poses.size() != manifest_.frames.size())
                throw Error("object '" + obj.entry.id + "': pose count " +
                            std::to_string(poses.size()) + " does not match frame count");

            TriMesh gen = obj.canonical;
            TransferredWeights w_prime;
            if (!obj.entry.ref_mesh_path.empty()) {
                const TriMesh ref =
                    load_scaled_mesh(manifest_.resolve(obj.entry.ref_mesh_path), manifest_.unit_scale);
                const AlignResult align = align_generated_to_reference(gen, ref);
                if (!align.converged)
                    log_warn("object '" + obj.entry.id + "': similarity alignment hit the "
                             "iteration cap; using best-so-far");
                gen = apply_transform(align.transform, gen);
                w_prime = transfer_skinning_weights(gen, ref, rig);
            } else if (rig.weights.size() == gen.vertices.size()) {
                w_prime = rig.weights;
            } else {
                throw Error("object '" + obj.entry.id + "': no ref_mesh_path and rig weights do "
                            "not match the mesh vertex count");
            }
            obj.placed = deform_sequence(gen, w_prime, rig, poses, obj.entry.canonical_frame);
            obj.has_placed = true;
        }
    }

    void track() {
        for (auto& obj : objects_) {
            if (obj.entry.cls == ObjectClass::Articulated) continue;
            const int canonical = obj.entry.canonical_frame;

            std::vector<PointCloud> clouds(manifest_.frames.size());
            std::vector<DepthGrid> depths(manifest_.frames.size());
            std::vector<MaskGrid> masks(manifest_.frames.size());
            for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
                const auto& fr = manifest_.frames[t];
                depths[t] = load_depth(manifest_.resolve(fr.depth_path));
                if (manifest_.unit_scale != 1.0)
                    for (auto& d : depths[t].data) d *= static_cast<float>(manifest_.unit_scale);
                masks[t] = load_mask_png(manifest_.resolve(fr.mask_path));
                try {
                    clouds[t] = backproject_depth(depths[t], masks[t], fr.camera, obj.mask_id);
                    estimate_normals(clouds[t], 16,
                                     fr.camera.world_to_camera.inverse().t);
                } catch (const Error&) {
                    obj.frame_flags[t] = true;  // occluded this frame
                }
            }
            if (clouds[canonical].points.empty())
                throw Error("object '" + obj.entry.id + "': empty cloud at canonical frame " +
                            std::to_string(canonical));

            const ScaledIcpResult fit = fit_canonical_alignment(
                obj.canonical, clouds[canonical], masks[canonical], depths[canonical],
                manifest_.frames[canonical].camera, config_.icp, obj.mask_id);
            const TriMesh aligned = apply_transform(fit.transform, obj.canonical);

            TrackResult result;
            if (obj.entry.cls == ObjectClass::Static) {
                result.transforms.assign(manifest_.frames.size(), RigidTransform::identity());
                result.residuals.assign(manifest_.frames.size(), fit.residual);
                result.converged.assign(manifest_.frames.size(), fit.converged);
            } else {
                result = chain_track(clouds, canonical, config_.icp);
            }
            obj.placed.clear();
            for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
                obj.placed.push_back(apply_transform(result.transforms[t], aligned));
                if (!result.converged[t]) obj.frame_flags[t] = true;
            }
            obj.has_placed = true;
            save_track(result, config_.output_dir + "/track_" + obj.entry.id + ".json");
        }
    }

    void refine() {
        require_placed("refine");
        for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
            const auto& fr = manifest_.frames[t];
            if (fr.rgb_path.empty())
                throw Error("refine: frame " + std::to_string(t) + " has no rgb_path");
            FrameObservation obs;
            obs.rgb = load_image_png(manifest_.resolve(fr.rgb_path));
            obs.depth = load_depth(manifest_.resolve(fr.depth_path));
            obs.mask = load_mask_png(manifest_.resolve(fr.mask_path));
            obs.camera = fr.camera;

            std::vector<SceneObject> scene;
            for (auto& obj : objects_) {
                SceneObject s;
                s.id = obj.entry.id;
                s.mask_id = obj.mask_id;
                s.splats = init_gaussians_from_mesh(obj.placed[t]);
                scene.push_back(std::move(s));
            }
            const RefineResult result = refine_frame(scene, obs, config_.refine);
            if (result.aborted)
                log_error("refine: non-finite loss at frame " + std::to_string(t));
            for (auto& obj : objects_) {
                const auto it = result.poses.find(obj.entry.id);
                if (it == result.poses.end()) continue;
                obj.placed[t] = apply_transform(it->second.to_rigid(), obj.placed[t]);
            }
            save_refined_poses(result, config_.output_dir + "/refined_f" + std::to_string(t) +
                                           ".json");
            refine_losses_.push_back(result.best_total_loss);

            if (config_.debug_renders) {
                GaussianSet combined;
                std::vector<int> ids;
                for (const auto& obj : objects_) {
                    GaussianSet g = init_gaussians_from_mesh(obj.placed[t]);
                    ids.insert(ids.end(), g.size(), obj.mask_id);
                    combined.append(g);
                }
                const RenderOutput render = rasterize(combined, fr.camera, &ids);
                fs::create_directories(config_.output_dir + "/debug");
                save_image_png(render.color, config_.output_dir + "/debug/refined_f" +
                                                 std::to_string(t) + ".png");
            }
        }
    }

    void evaluate() {
        if (manifest_.ground_truth.empty())
            throw Error("evaluate: manifest declares no ground truth");
        if (!all_placed()) load_exported();

        EvalProtocol protocol = config_.protocol;
        if (protocol.seed == 0) protocol.seed = manifest_.seed + 1;

        struct Acc {
            MetricReport sum;
            int n = 0;
            void add(const MetricReport& r) {
                sum.dist_acc += r.dist_acc;
                sum.completeness += r.completeness;
                sum.f_score += r.f_score;
                sum.chamfer += r.chamfer;
                sum.tau = r.tau;
                sum.n_pred += r.n_pred;
                sum.n_gt += r.n_gt;
                ++n;
            }
            MetricReport mean() const {
                MetricReport m = sum;
                if (n) {
                    m.dist_acc /= n;
                    m.completeness /= n;
                    m.f_score /= n;
                    m.chamfer /= n;
                }
                return m;
            }
        };
        std::map<std::string, Acc> per_object;
        std::map<EvalSplit, Acc> per_split;

        for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
            std::vector<SceneObjectMesh> pred, gt;
            for (const auto& obj : objects_) {
                const auto it = manifest_.ground_truth.find(obj.entry.id);
                if (it == manifest_.ground_truth.end()) continue;
                pred.push_back({obj.entry.id, obj.placed[t], obj.entry.cls});
                gt.push_back({obj.entry.id,
                              load_scaled_mesh(manifest_.resolve(it->second[t]),
                                               manifest_.unit_scale),
                              obj.entry.cls});
            }
            for (std::size_t i = 0; i < pred.size(); ++i) {
                EvalProtocol obj_protocol = protocol;
                if (obj_protocol.align_mode == AlignMode::StaticSceneIcp)
                    obj_protocol.align_mode = AlignMode::None;
                per_object[pred[i].id].add(
                    adsr::evaluate(Geometry(pred[i].mesh), Geometry(gt[i].mesh), obj_protocol));
            }
            for (const EvalSplit split :
                 {EvalSplit::Static, EvalSplit::Dynamic, EvalSplit::Whole}) {
                try {
                    per_split[split].add(evaluate_split(pred, gt, split, protocol));
                } catch (const Error& e) {
                    log_warn(std::string("evaluate: split skipped: ") + e.what());
                }
            }
        }

        std::vector<ReportRow> rows;
        for (const auto& [id, acc] : per_object)
            rows.push_back({id, "object", acc.mean(),
                            to_string(protocol.align_mode == AlignMode::StaticSceneIcp
                                          ? AlignMode::None
                                          : protocol.align_mode)});
        for (const auto& [split, acc] : per_split)
            if (acc.n)
                rows.push_back({to_string(split), to_string(split), acc.mean(),
                                to_string(protocol.align_mode)});
        save_report_csv(rows, config_.output_dir + "/report.csv");
        save_report_json(rows, config_.output_dir + "/report.json");
    }

    void export_frames() {
        require_placed("export");
        for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "frame_%03zu", t);
            const std::string dir = config_.output_dir + "/frames/" + buf;
            fs::create_directories(dir);
            for (const auto& obj : objects_)
                save_mesh(obj.placed[t], dir + "/" + obj.entry.id + ".ply");
        }
    }

    void render() {
        require_placed("render");
        fs::create_directories(config_.output_dir + "/render");
        for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
            const auto& fr = manifest_.frames[t];
            GaussianSet combined;
            std::vector<int> ids;
            for (const auto& obj : objects_) {
                GaussianSet g = init_gaussians_from_mesh(obj.placed[t]);
                ids.insert(ids.end(), g.size(), obj.mask_id);
                combined.append(g);
            }
            const RenderOutput out = rasterize(combined, fr.camera, &ids);
            ImageRGB overlay = out.color;
            if (!fr.rgb_path.empty()) {
                const ImageRGB rgb = load_image_png(manifest_.resolve(fr.rgb_path));
                for (std::size_t p = 0; p < overlay.pixels.size(); ++p)
                    overlay.pixels[p] = 0.5f * overlay.pixels[p] + 0.5f * rgb.pixels[p];
            }
            char buf[32];
            std::snprintf(buf, sizeof(buf), "frame_%03zu.png", t);
            save_image_png(overlay, config_.output_dir + "/render/" + std::string(buf));
        }
    }

    json summary_flags() const {
        json flags = json::object();
        for (const auto& obj : objects_) {
            json frames = json::array();
            for (const auto f : obj.frame_flags) frames.push_back(static_cast<bool>(f));
            flags[obj.entry.id] = frames;
        }
        return flags;
    }

private:
    bool all_placed() const {
        for (const auto& obj : objects_)
            if (!obj.has_placed) return false;
        return !objects_.empty();
    }

    void require_placed(const std::string& stage) {
        if (!all_placed()) load_exported();
        for (const auto& obj : objects_)
            if (!obj.has_placed)
                throw Error(stage + ": object '" + obj.entry.id +
                            "' has no placed meshes; run deform/track first");
    }

    /// Picks up previously exported per-frame meshes (stage idempotence and
    /// evaluate-only runs).
    void load_exported() {
        for (auto& obj : objects_) {
            if (obj.has_placed) continue;
            std::vector<TriMesh> placed;
            for (std::size_t t = 0; t < manifest_.frames.size(); ++t) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "frame_%03zu", t);
                const std::string p =
                    config_.output_dir + "/frames/" + buf + "/" + obj.entry.id + ".ply";
                if (!fs::exists(p)) break;
                placed.push_back(load_mesh(p));
            }
            if (placed.size() == manifest_.frames.size()) {
                obj.placed = std::move(placed);
                obj.has_placed = true;
            }
        }
    }

    const PipelineConfig& config_;
    const SceneManifest& manifest_;
    std::vector<ObjectState> objects_;
    std::vector<double> refine_losses_;
};

}  // namespace

int run_pipeline(const PipelineConfig& config) {
    try {
        config.check_valid();
    } catch (const Error& e) {
        log_error(std::string("config: ") + e.what());
        return 2;
    }

    const ValidationReport validation = validate_manifest(config.manifest_path);
    for (const auto& issue : validation.issues)
        log(issue.severity == ValidationIssue::Severity::ErrorLevel ? LogLevel::Error
                                                                    : LogLevel::Warn,
            issue.message);
    if (!validation.ok()) return 2;

#ifdef _OPENMP
    if (config.threads > 0) omp_set_num_threads(config.threads);
#endif

    fs::create_directories(config.output_dir);
    const std::string failed_marker = config.output_dir + "/FAILED";
    if (fs::exists(failed_marker)) fs::remove(failed_marker);

    SceneManifest manifest;
    try {
        manifest = load_manifest(config.manifest_path);
    } catch (const Error& e) {
        log_error(e.what());
        return 2;
    }

    json timings = json::object();
    std::string failed_stage;
    std::unique_ptr<PipelineRun> run;
    try {
        run = std::make_unique<PipelineRun>(config, manifest);
    } catch (const Error& e) {
        log_error(std::string("ingest: ") + e.what());
        std::ofstream(failed_marker) << "ingest: " << e.what() << "\n";
        return 1;
    }

    const Stage order[] = {Stage::Deform, Stage::Track, Stage::Refine,
                           Stage::Evaluate, Stage::Export, Stage::Render};
    for (const Stage stage : order) {
        if (!config.stages.count(stage)) continue;
        const auto start = std::chrono::steady_clock::now();
        try {
            switch (stage) {
                case Stage::Deform: run->deform(); break;
                case Stage::Track: run->track(); break;
                case Stage::Refine: run->refine(); break;
                case Stage::Evaluate: run->evaluate(); break;
                case Stage::Export: run->export_frames(); break;
                case Stage::Render: run->render(); break;
            }
        } catch (const std::exception& e) {
            log_error("stage " + to_string(stage) + " failed: " + e.what());
            failed_stage = to_string(stage);
            std::ofstream(failed_marker) << to_string(stage) << ": " << e.what() << "\n";
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        timings[to_string(stage)] = secs;
        if (!failed_stage.empty()) break;
    }

    json summary;
    summary["manifest"] = config.manifest_path;
    summary["seed"] = config.seed;
    summary["threads"] = config.threads;
    summary["timings_sec"] = timings;
    summary["flags"] = run->summary_flags();
    summary["failed_stage"] = failed_stage;
    std::ofstream(config.output_dir + "/run_summary.json") << summary.dump(2) << "\n";

    return failed_stage.empty() ? 0 : 1;
}

}  // namespace adsr
