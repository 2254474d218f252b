#pragma once

#include <string>
#include <vector>

#include "adsr/camera.hpp"
#include "adsr/image.hpp"
#include "adsr/mesh.hpp"

namespace adsr {

enum class IcpVariant { PointToPoint, PointToPlane };

struct IcpParams {
    int max_iterations = 50;
    double convergence_tol = 1e-6;          // RMSE change, meters
    double correspondence_rejection = 2.5;  // multiple of median distance
    IcpVariant variant = IcpVariant::PointToPlane;
    double max_correspondence_dist = std::numeric_limits<double>::infinity();

    void check_valid() const;
};

struct IcpResult {
    RigidTransform transform;
    double residual = 0.0;  // RMSE over accepted correspondences
    bool converged = false;
    bool plane_fallback = false;       // point-to-plane requested, no normals
    std::vector<double> rmse_trace;    // accepted (non-increasing) iterations
};

struct ScaledIcpResult {
    SimilarityTransform transform;
    double residual = 0.0;
    bool converged = false;
};

/// Back-projects masked finite-depth pixels into a world-space cloud.
/// mask_id selects which mask value counts; 0 means any nonzero pixel.
/// Throws Error when no valid masked pixel exists.
PointCloud backproject_depth(const DepthGrid& depth, const MaskGrid& mask,
                             const Camera& camera, int mask_id = 0);

/// PCA normals from the k nearest neighbors, oriented toward `viewpoint`.
void estimate_normals(PointCloud& cloud, int k = 16,
                      const Vec3& viewpoint = Vec3::Zero());

IcpResult icp_rigid(const PointCloud& src, const PointCloud& dst,
                    const RigidTransform& init, const IcpParams& params);

/// Point-to-point ICP with a uniform scale in the inner Umeyama step.
ScaledIcpResult icp_similarity(const PointCloud& src, const PointCloud& dst,
                               const SimilarityTransform& init, const IcpParams& params);

/// Coarse placement from the median masked depth + rms-radius scale match,
/// refined by scaled ICP of sampled mesh surface onto the cloud.
ScaledIcpResult fit_canonical_alignment(const TriMesh& canonical_mesh,
                                        const PointCloud& canonical_cloud,
                                        const MaskGrid& mask, const DepthGrid& depth,
                                        const Camera& camera, const IcpParams& params,
                                        int mask_id = 0);

struct TrackResult {
    std::vector<RigidTransform> transforms;  // canonical mesh -> frame t
    std::vector<double> residuals;
    std::vector<bool> converged;
};

/// Chains adjacent-pair ICPs outward from the canonical frame; empty-cloud
/// frames inherit the nearest tracked transform and are flagged unconverged.
TrackResult chain_track(const std::vector<PointCloud>& clouds, int canonical_idx,
                        const IcpParams& params);

// TrackResult JSON: {frames:[{R:[9],t:[3],residual,converged}...]}.
void save_track(const TrackResult& r, const std::string& path);
TrackResult load_track(const std::string& path);

}  // namespace adsr
