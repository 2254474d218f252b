#pragma once

#include <string>
#include <variant>
#include <vector>

#include "adsr/manifest.hpp"
#include "adsr/mesh.hpp"

namespace adsr {

enum class AlignMode { None, PerObjectIcp, StaticSceneIcp };

std::string to_string(AlignMode m);

struct EvalProtocol {
    AlignMode align_mode = AlignMode::None;
    double tau = 0.05;          // F-score threshold, meters
    int samples_per_mesh = 100000;
    std::uint64_t seed = 0;

    void check_valid() const;
};

struct MetricReport {
    double dist_acc = 0.0;      // pred -> gt mean NN distance, meters
    double completeness = 0.0;  // gt -> pred
    double f_score = 0.0;
    double chamfer = 0.0;       // (dist_acc + completeness) / 2
    double tau = 0.05;
    std::size_t n_pred = 0, n_gt = 0;
};

using Geometry = std::variant<TriMesh, PointCloud>;

/// Samples meshes (seeded, area-uniform), then symmetric NN metrics.
/// PerObjectIcp protocol pre-aligns pred onto gt.
MetricReport evaluate(const Geometry& pred, const Geometry& gt, const EvalProtocol& protocol);

struct SceneObjectMesh {
    std::string id;
    TriMesh mesh;
    ObjectClass cls = ObjectClass::Rigid;
};

/// Rigid ICP over concatenated static-object samples; the transform to apply
/// to every predicted object before whole-scene evaluation. Throws Error when
/// no static elements exist on either side.
RigidTransform align_scene_by_static(const std::vector<SceneObjectMesh>& pred_scene,
                                     const std::vector<SceneObjectMesh>& gt_scene,
                                     const EvalProtocol& protocol);

enum class EvalSplit { Static, Dynamic, Whole };

std::string to_string(EvalSplit s);

/// Merges the split's objects (dynamic = articulated + rigid), optionally
/// static-aligns the predicted scene, then evaluates.
MetricReport evaluate_split(const std::vector<SceneObjectMesh>& pred_scene,
                            const std::vector<SceneObjectMesh>& gt_scene,
                            EvalSplit split, const EvalProtocol& protocol);

struct ReportRow {
    std::string id;     // object id or split name
    std::string split;  // "object", "static", "dynamic", "whole"
    MetricReport report;
    std::string align_mode;
};

// CSV columns: id, split, dist_acc, comp, f_score, chamfer, tau, align_mode.
void save_report_csv(const std::vector<ReportRow>& rows, const std::string& path);
void save_report_json(const std::vector<ReportRow>& rows, const std::string& path);

}  // namespace adsr
