#include "adsr/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"
#include "adsr/icp.hpp"
#include "adsr/kdtree.hpp"

using nlohmann::json;

namespace adsr {

std::string to_string(AlignMode m) {
    switch (m) {
        case AlignMode::None: return "none";
        case AlignMode::PerObjectIcp: return "per_object_icp";
        default: return "static_scene_icp";
    }
}

std::string to_string(EvalSplit s) {
    switch (s) {
        case EvalSplit::Static: return "static";
        case EvalSplit::Dynamic: return "dynamic";
        default: return "whole";
    }
}

void EvalProtocol::check_valid() const {
    if (tau <= 0) throw Error("protocol: tau must be positive");
    if (samples_per_mesh < 1000) throw Error("protocol: samples_per_mesh must be >= 1000");
}

namespace {

PointCloud to_samples(const Geometry& g, int n, std::uint64_t seed) {
    if (std::holds_alternative<PointCloud>(g)) return std::get<PointCloud>(g);
    return sample_surface(std::get<TriMesh>(g), n, seed);
}

/// One-directional mean NN distance and the fraction within tau.
void directed(const std::vector<Vec3>& from, const KdTree& to_tree, double tau,
              double* mean_dist, double* frac_within) {
    double sum = 0;
    std::size_t within = 0;
    for (const auto& p : from) {
        double sq;
        to_tree.nearest(p, &sq);
        const double d = std::sqrt(sq);
        sum += d;
        if (d <= tau) ++within;
    }
    *mean_dist = sum / double(from.size());
    *frac_within = double(within) / double(from.size());
}

MetricReport evaluate_clouds(const PointCloud& pred, const PointCloud& gt, double tau) {
    if (pred.points.empty() || gt.points.empty())
        throw Error("evaluate: empty geometry");
    MetricReport r;
    r.tau = tau;
    r.n_pred = pred.points.size();
    r.n_gt = gt.points.size();
    const KdTree gt_tree(gt.points);
    const KdTree pred_tree(pred.points);
    double precision, recall;
    directed(pred.points, gt_tree, tau, &r.dist_acc, &precision);
    directed(gt.points, pred_tree, tau, &r.completeness, &recall);
    r.chamfer = 0.5 * (r.dist_acc + r.completeness);
    r.f_score = (precision + recall) > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    return r;
}

}  // namespace

MetricReport evaluate(const Geometry& pred, const Geometry& gt, const EvalProtocol& protocol) {
    protocol.check_valid();
    PointCloud p = to_samples(pred, protocol.samples_per_mesh, protocol.seed);
    const PointCloud g = to_samples(gt, protocol.samples_per_mesh, protocol.seed + 1);
    if (protocol.align_mode == AlignMode::PerObjectIcp) {
        IcpParams params;
        params.variant = IcpVariant::PointToPoint;
        const IcpResult icp = icp_rigid(p, g, RigidTransform::identity(), params);
        p = apply_transform(icp.transform, p);
    }
    return evaluate_clouds(p, g, protocol.tau);
}

RigidTransform align_scene_by_static(const std::vector<SceneObjectMesh>& pred_scene,
                                     const std::vector<SceneObjectMesh>& gt_scene,
                                     const EvalProtocol& protocol) {
    // Both sides sample with the same per-object seed: where the predicted
    // surface truly matches the ground truth, the clouds correspond point
    // for point and the fit has no sampling bias.
    PointCloud pred_static, gt_static;
    std::uint64_t salt = 0;
    for (const auto& o : pred_scene)
        if (o.cls == ObjectClass::Static) {
            const auto s = sample_surface(o.mesh, protocol.samples_per_mesh, protocol.seed + salt++);
            pred_static.points.insert(pred_static.points.end(), s.points.begin(), s.points.end());
        }
    salt = 0;
    for (const auto& o : gt_scene)
        if (o.cls == ObjectClass::Static) {
            const auto s = sample_surface(o.mesh, protocol.samples_per_mesh, protocol.seed + salt++);
            gt_static.points.insert(gt_static.points.end(), s.points.begin(), s.points.end());
        }
    if (pred_static.points.empty() || gt_static.points.empty())
        throw Error("align_scene_by_static: no static elements; use per-object alignment instead");

    // Point-to-plane: independent samplings of the same surface have no
    // common points, so point-to-point correspondences carry a tangential
    // bias on flat regions that plane residuals are immune to.
    estimate_normals(gt_static, 16);
    IcpParams params;
    params.variant = IcpVariant::PointToPlane;
    params.max_iterations = 100;
    return icp_rigid(pred_static, gt_static, RigidTransform::identity(), params).transform;
}

MetricReport evaluate_split(const std::vector<SceneObjectMesh>& pred_scene,
                            const std::vector<SceneObjectMesh>& gt_scene,
                            EvalSplit split, const EvalProtocol& protocol) {
    protocol.check_valid();
    auto in_split = [&](ObjectClass cls) {
        switch (split) {
            case EvalSplit::Static: return cls == ObjectClass::Static;
            case EvalSplit::Dynamic:
                return cls == ObjectClass::Articulated || cls == ObjectClass::Rigid;
            default: return true;
        }
    };

    RigidTransform scene_align = RigidTransform::identity();
    if (protocol.align_mode == AlignMode::StaticSceneIcp &&
        (split == EvalSplit::Whole || split == EvalSplit::Static))
        scene_align = align_scene_by_static(pred_scene, gt_scene, protocol);

    PointCloud pred, gt;
    std::uint64_t salt = 100;
    for (const auto& o : pred_scene) {
        if (!in_split(o.cls)) continue;
        const auto* gt_obj = [&]() -> const SceneObjectMesh* {
            for (const auto& g : gt_scene)
                if (g.id == o.id) return &g;
            return nullptr;
        }();
        if (!gt_obj) throw Error("evaluate_split: no ground truth for object '" + o.id + "'");
        auto ps = sample_surface(o.mesh, protocol.samples_per_mesh, protocol.seed + salt);
        ps = apply_transform(scene_align, ps);
        pred.points.insert(pred.points.end(), ps.points.begin(), ps.points.end());
        const auto gs = sample_surface(gt_obj->mesh, protocol.samples_per_mesh,
                                       protocol.seed + salt + 1);
        gt.points.insert(gt.points.end(), gs.points.begin(), gs.points.end());
        salt += 2;
    }
    if (pred.points.empty())
        throw Error("evaluate_split: no objects in split '" + to_string(split) + "'");
    return evaluate_clouds(pred, gt, protocol.tau);
}

void save_report_csv(const std::vector<ReportRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot write report " + path);
    f << "id,split,dist_acc,comp,f_score,chamfer,tau,align_mode\n";
    f.precision(12);
    for (const auto& r : rows)
        f << r.id << "," << r.split << "," << r.report.dist_acc << "," << r.report.completeness
          << "," << r.report.f_score << "," << r.report.chamfer << "," << r.report.tau << ","
          << r.align_mode << "\n";
}

void save_report_json(const std::vector<ReportRow>& rows, const std::string& path) {
    json j = json::array();
    for (const auto& r : rows)
        j.push_back({{"id", r.id},
                     {"split", r.split},
                     {"dist_acc", r.report.dist_acc},
                     {"comp", r.report.completeness},
                     {"f_score", r.report.f_score},
                     {"chamfer", r.report.chamfer},
                     {"tau", r.report.tau},
                     {"align_mode", r.align_mode},
                     {"n_pred", r.report.n_pred},
                     {"n_gt", r.report.n_gt}});
    std::ofstream f(path);
    if (!f) throw Error("cannot write report " + path);
    f << j.dump(2) << "\n";
}

}  // namespace adsr
