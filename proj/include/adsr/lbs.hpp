#pragma once

#include <string>
#include <vector>

#include "adsr/mesh.hpp"
#include "adsr/transform.hpp"

namespace adsr {

/// Sparse per-vertex skinning weights: (bone index, weight) pairs per row.
using WeightRows = std::vector<std::vector<std::pair<int, double>>>;

struct SkinnedRig {
    int n_b = 0;
    std::vector<int> parents;          // parent[k] < k, -1 for root
    std::vector<Mat4> rest_transforms; // bind-pose world transform per bone
    std::vector<Mat4> inverse_bind;
    WeightRows weights;                // reference body's w

    void check_valid() const;
};

struct PoseParams {
    std::vector<Vec3> joint_rotations;  // axis-angle per bone
    Vec3 root_translation = Vec3::Zero();
};

/// Per-bone skinning matrices B[k] = world(k) * inverse_bind[k].
using BoneTransforms = std::vector<Mat4>;

/// Per-vertex weights transferred onto the generated mesh (the w' rows).
using TransferredWeights = WeightRows;

BoneTransforms compute_bone_transforms(const SkinnedRig& rig, const PoseParams& pose);

/// Matrix-blending LBS: blend the 4x4s per vertex, then transform.
std::vector<Vec3> lbs_apply(const std::vector<Vec3>& vertices, const WeightRows& weights,
                            const BoneTransforms& B);

/// Per vertex: M_d * inverse(M_c) * x with M = sum of weighted bone matrices.
/// Throws Error naming the vertex when a blended matrix is singular
/// (condition number > 1e12).
std::vector<Vec3> rebase_canonical(const std::vector<Vec3>& vertices,
                                   const TransferredWeights& w_prime,
                                   const BoneTransforms& B_c, const BoneTransforms& B_d);

struct AlignResult {
    SimilarityTransform transform;
    bool converged = true;
    double residual = 0.0;
};

/// Similarity fit of a generated mesh onto the posed reference body:
/// centroid/rms-radius seed, then scaled ICP on sampled surfaces.
AlignResult align_generated_to_reference(const TriMesh& gen, const TriMesh& ref_posed);

/// Closest-point-on-surface transfer with barycentric interpolation of the
/// containing triangle's weight rows; rows renormalized to sum 1.
TransferredWeights transfer_skinning_weights(const TriMesh& gen_aligned,
                                             const TriMesh& ref_posed,
                                             const SkinnedRig& rig);

/// Rebases the canonical-frame mesh to every frame's pose.
std::vector<TriMesh> deform_sequence(const TriMesh& gen, const TransferredWeights& w_prime,
                                     const SkinnedRig& rig,
                                     const std::vector<PoseParams>& poses,
                                     int canonical_frame);

// Rig file: JSON {n_b, parents, rest_transforms (4x4 row-major each),
// weights: [[[bone,w]...] per vertex]}.
SkinnedRig load_rig(const std::string& path);
void save_rig(const SkinnedRig& rig, const std::string& path);

// Pose file: JSON list per frame {joint_rotations, root_translation}.
std::vector<PoseParams> load_poses(const std::string& path);
void save_poses(const std::vector<PoseParams>& poses, const std::string& path);

}  // namespace adsr
