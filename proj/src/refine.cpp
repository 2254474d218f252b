#include "adsr/refine.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"
#include "adsr/log.hpp"

using nlohmann::json;

namespace adsr {

namespace {

bool mask_has_id(const MaskGrid& mask, int id) {
    for (const auto v : mask.data)
        if (v == id) return true;
    return false;
}

}  // namespace

double scene_loss(const std::vector<SceneObject>& scene,
                  const std::vector<CorrectivePose>& poses,
                  const FrameObservation& frame, const LossWeights& weights,
                  std::map<std::string, double>* per_object) {
    if (scene.size() != poses.size())
        throw Error("scene_loss: pose count does not match object count");

    GaussianSet combined;
    std::vector<int> ids;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const GaussianSet moved = apply_corrective(scene[i].splats, poses[i]);
        ids.insert(ids.end(), moved.size(), scene[i].mask_id);
        combined.append(moved);
    }
    const RenderOutput render = rasterize(combined, frame.camera, &ids);

    double total = 0;
    for (const auto& obj : scene) {
        if (!mask_has_id(frame.mask, obj.mask_id)) continue;  // fully occluded
        const double lc =
            loss_color(render.color, frame.rgb, frame.mask, weights.lambda_ssim, obj.mask_id);
        const double ld = loss_depth(render.depth, frame.depth, frame.mask, obj.mask_id);
        const double l = loss_total(lc, ld, weights);
        if (per_object) (*per_object)[obj.id] = l;
        total += l;
    }
    return total;
}

Eigen::Matrix<double, 6, 1> pose_gradient(const std::vector<SceneObject>& scene,
                                          std::size_t object_index,
                                          const std::vector<CorrectivePose>& poses,
                                          const FrameObservation& frame,
                                          const LossWeights& weights, double fd_step) {
    Eigen::Matrix<double, 6, 1> grad;
    std::vector<CorrectivePose> probe = poses;
    for (int p = 0; p < 6; ++p) {
        auto& param = p < 3 ? probe[object_index].delta_rotation[p]
                            : probe[object_index].delta_translation[p - 3];
        const double base = param;
        param = base + fd_step;
        const double plus = scene_loss(scene, probe, frame, weights);
        param = base - fd_step;
        const double minus = scene_loss(scene, probe, frame, weights);
        param = base;
        grad(p) = (plus - minus) / (2.0 * fd_step);
    }
    return grad;
}

RefineResult refine_frame(const std::vector<SceneObject>& scene,
                          const FrameObservation& frame, const RefineConfig& config) {
    const std::size_t n = scene.size();
    std::vector<CorrectivePose> poses(n);
    for (std::size_t i = 0; i < n; ++i) poses[i].pivot = scene[i].splats.centroid();

    // objects invisible in this frame keep their initialization
    std::vector<bool> active(n);
    for (std::size_t i = 0; i < n; ++i) active[i] = mask_has_id(frame.mask, scene[i].mask_id);

    RefineResult result;
    std::map<std::string, double> per_object;
    double loss = scene_loss(scene, poses, frame, config.weights, &per_object);
    if (!std::isfinite(loss)) {
        result.aborted = true;
        loss = std::numeric_limits<double>::infinity();
    }
    std::vector<CorrectivePose> best_poses = poses;
    double best_loss = loss;
    std::map<std::string, double> best_per_object = per_object;

    // Adam-style per-parameter moments
    std::vector<Eigen::Matrix<double, 6, 1>> m(n, Eigen::Matrix<double, 6, 1>::Zero());
    std::vector<Eigen::Matrix<double, 6, 1>> v(n, Eigen::Matrix<double, 6, 1>::Zero());
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    const int third = std::max(config.iterations / 3, 1);
    for (int iter = 0; !result.aborted && iter < config.iterations; ++iter) {
        const double decay = std::pow(0.5, iter / third);
        const double lr_rot = config.step_rotation * decay;
        const double lr_trans = config.step_translation * decay;

        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            const Eigen::Matrix<double, 6, 1> g =
                pose_gradient(scene, i, poses, frame, config.weights, config.fd_step);
            m[i] = beta1 * m[i] + (1 - beta1) * g;
            v[i] = beta2 * v[i] + (1 - beta2) * g.cwiseProduct(g);
            const double c1 = 1 - std::pow(beta1, iter + 1);
            const double c2 = 1 - std::pow(beta2, iter + 1);
            for (int p = 0; p < 6; ++p) {
                const double step = (p < 3 ? lr_rot : lr_trans) * (m[i](p) / c1) /
                                    (std::sqrt(v[i](p) / c2) + eps);
                if (p < 3)
                    poses[i].delta_rotation[p] -= step;
                else
                    poses[i].delta_translation[p - 3] -= step;
            }
        }

        per_object.clear();
        loss = scene_loss(scene, poses, frame, config.weights, &per_object);
        if (!std::isfinite(loss)) {
            log_error("refine_frame: non-finite loss at iteration " + std::to_string(iter) +
                      "; keeping last finite poses");
            result.aborted = true;
            break;
        }
        if (loss < best_loss) {
            best_loss = loss;
            best_poses = poses;
            best_per_object = per_object;
        }
    }

    for (std::size_t i = 0; i < n; ++i) result.poses[scene[i].id] = best_poses[i];
    result.final_losses = best_per_object;
    result.best_total_loss = best_loss;
    return result;
}

void save_refined_poses(const RefineResult& r, const std::string& path) {
    json j;
    for (const auto& [id, pose] : r.poses) {
        json jp;
        jp["delta_R_axis_angle"] = {pose.delta_rotation.x(), pose.delta_rotation.y(),
                                    pose.delta_rotation.z()};
        jp["delta_T"] = {pose.delta_translation.x(), pose.delta_translation.y(),
                         pose.delta_translation.z()};
        jp["pivot"] = {pose.pivot.x(), pose.pivot.y(), pose.pivot.z()};
        const auto it = r.final_losses.find(id);
        jp["final_loss"] = it != r.final_losses.end() ? it->second : 0.0;
        j[id] = jp;
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write poses " + path);
    f << j.dump(2) << "\n";
}

RefineResult load_refined_poses(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open poses " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("malformed pose JSON " + path + ": " + e.what());
    }
    RefineResult r;
    for (const auto& [id, jp] : j.items()) {
        CorrectivePose pose;
        const auto dr = jp.at("delta_R_axis_angle").get<std::vector<double>>();
        const auto dt = jp.at("delta_T").get<std::vector<double>>();
        const auto pv = jp.at("pivot").get<std::vector<double>>();
        pose.delta_rotation = Vec3(dr[0], dr[1], dr[2]);
        pose.delta_translation = Vec3(dt[0], dt[1], dt[2]);
        pose.pivot = Vec3(pv[0], pv[1], pv[2]);
        r.poses[id] = pose;
        r.final_losses[id] = jp.value("final_loss", 0.0);
    }
    return r;
}

}  // namespace adsr
