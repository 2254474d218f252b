#pragma once

#include <map>
#include <string>
#include <vector>

#include "adsr/losses.hpp"
#include "adsr/splats.hpp"

namespace adsr {

struct FrameObservation {
    ImageRGB rgb;
    DepthGrid depth;
    MaskGrid mask;  // per-pixel object mask ids, 0 = background
    Camera camera;
};

struct SceneObject {
    std::string id;
    int mask_id = 0;
    GaussianSet splats;
};

struct RefineConfig {
    int iterations = 200;
    double step_rotation = 1e-2;
    double step_translation = 1e-2;
    double fd_step = 1e-4;
    LossWeights weights;
};

struct RefineResult {
    std::map<std::string, CorrectivePose> poses;
    std::map<std::string, double> final_losses;  // per-object masked loss at best
    double best_total_loss = 0.0;
    bool aborted = false;  // non-finite loss hit; poses are last finite
};

/// Total masked loss of the full-scene render against the observation, with
/// the given corrective poses applied per object. Summed over objects.
double scene_loss(const std::vector<SceneObject>& scene,
                  const std::vector<CorrectivePose>& poses,
                  const FrameObservation& frame, const LossWeights& weights,
                  std::map<std::string, double>* per_object = nullptr);

/// Central finite-difference gradient of scene_loss with respect to one
/// object's 6 pose parameters (rotation xyz, translation xyz).
Eigen::Matrix<double, 6, 1> pose_gradient(const std::vector<SceneObject>& scene,
                                          std::size_t object_index,
                                          const std::vector<CorrectivePose>& poses,
                                          const FrameObservation& frame,
                                          const LossWeights& weights,
                                          double fd_step = 1e-4);

/// Joint per-object 6-DoF refinement: adaptive first/second-moment steps,
/// step halved every third of the budget, best-loss poses returned.
RefineResult refine_frame(const std::vector<SceneObject>& scene,
                          const FrameObservation& frame, const RefineConfig& config);

// Refined-pose JSON: {object_id: {delta_R_axis_angle:[3], delta_T:[3],
// pivot:[3], final_loss}}.
void save_refined_poses(const RefineResult& r, const std::string& path);
RefineResult load_refined_poses(const std::string& path);

}  // namespace adsr
