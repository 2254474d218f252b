#include "adsr/lbs.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"
#include "adsr/icp.hpp"
#include "adsr/kdtree.hpp"

using nlohmann::json;

namespace adsr {

void SkinnedRig::check_valid() const {
    if (n_b <= 0) throw Error("rig: bone count must be positive");
    if (static_cast<int>(parents.size()) != n_b ||
        static_cast<int>(rest_transforms.size()) != n_b ||
        static_cast<int>(inverse_bind.size()) != n_b)
        throw Error("rig: per-bone array sizes disagree with n_b");
    for (int k = 0; k < n_b; ++k) {
        if (parents[k] >= k)
            throw Error("rig: bone " + std::to_string(k) + " parent " +
                        std::to_string(parents[k]) + " is not topologically sorted");
        if (parents[k] < -1) throw Error("rig: invalid parent index");
        const Mat4 prod = rest_transforms[k] * inverse_bind[k];
        if ((prod - Mat4::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            throw Error("rig: inverse_bind[" + std::to_string(k) +
                        "] is not the inverse of rest_transforms[" + std::to_string(k) + "]");
    }
    for (std::size_t v = 0; v < weights.size(); ++v) {
        double sum = 0;
        for (const auto& [bone, w] : weights[v]) {
            if (bone < 0 || bone >= n_b)
                throw Error("rig: weight row " + std::to_string(v) + " references bone " +
                            std::to_string(bone));
            if (w < 0) throw Error("rig: negative weight at vertex " + std::to_string(v));
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw Error("rig: weights at vertex " + std::to_string(v) + " sum to " +
                        std::to_string(sum));
    }
}

BoneTransforms compute_bone_transforms(const SkinnedRig& rig, const PoseParams& pose) {
    if (static_cast<int>(pose.joint_rotations.size()) != rig.n_b)
        throw Error("pose has " + std::to_string(pose.joint_rotations.size()) +
                    " joint rotations for a rig with " + std::to_string(rig.n_b) + " bones");

    std::vector<Mat4> world(rig.n_b);
    for (int k = 0; k < rig.n_b; ++k) {
        Mat4 rot = Mat4::Identity();
        rot.topLeftCorner<3, 3>() = axis_angle_to_matrix(pose.joint_rotations[k]);
        const int p = rig.parents[k];
        // local rotation acts about the bone's rest joint location
        if (p < 0) {
            Mat4 root_shift = Mat4::Identity();
            root_shift.topRightCorner<3, 1>() = pose.root_translation;
            world[k] = root_shift * rig.rest_transforms[k] * rot;
        } else {
            const Mat4 rest_local = rig.inverse_bind[p] * rig.rest_transforms[k];
            world[k] = world[p] * rest_local * rot;
        }
    }
    BoneTransforms B(rig.n_b);
    for (int k = 0; k < rig.n_b; ++k) B[k] = world[k] * rig.inverse_bind[k];
    return B;
}

namespace {

Mat4 blend_matrices(const std::vector<std::pair<int, double>>& row, const BoneTransforms& B,
                    std::size_t vertex) {
    Mat4 m = Mat4::Zero();
    for (const auto& [bone, w] : row) {
        if (bone < 0 || bone >= static_cast<int>(B.size()))
            throw Error("weight row " + std::to_string(vertex) + " references bone " +
                        std::to_string(bone) + " out of range");
        m += w * B[bone];
    }
    return m;
}

}  // namespace

std::vector<Vec3> lbs_apply(const std::vector<Vec3>& vertices, const WeightRows& weights,
                            const BoneTransforms& B) {
    if (weights.size() != vertices.size())
        throw Error("lbs_apply: weight rows (" + std::to_string(weights.size()) +
                    ") do not match vertex count (" + std::to_string(vertices.size()) + ")");
    std::vector<Vec3> out(vertices.size());
#pragma omp parallel for schedule(static)
    for (long long v = 0; v < static_cast<long long>(vertices.size()); ++v) {
        const Mat4 m = blend_matrices(weights[v], B, v);
        out[v] = m.topLeftCorner<3, 3>() * vertices[v] + m.topRightCorner<3, 1>();
    }
    return out;
}

std::vector<Vec3> rebase_canonical(const std::vector<Vec3>& vertices,
                                   const TransferredWeights& w_prime,
                                   const BoneTransforms& B_c, const BoneTransforms& B_d) {
    if (w_prime.size() != vertices.size())
        throw Error("rebase_canonical: weight rows do not match vertex count");
    if (B_c.size() != B_d.size())
        throw Error("rebase_canonical: canonical and target bone counts differ");

    std::vector<Vec3> out(vertices.size());
    std::atomic<long long> bad_vertex{-1};
#pragma omp parallel for schedule(static)
    for (long long v = 0; v < static_cast<long long>(vertices.size()); ++v) {
        if (bad_vertex.load(std::memory_order_relaxed) >= 0) continue;
        const Mat4 mc = blend_matrices(w_prime[v], B_c, v);
        Eigen::JacobiSVD<Mat4> svd(mc);
        const double cond = svd.singularValues()(0) / svd.singularValues()(3);
        if (!std::isfinite(cond) || cond > 1e12) {
            long long expect = -1;
            bad_vertex.compare_exchange_strong(expect, v);
            continue;
        }
        const Mat4 md = blend_matrices(w_prime[v], B_d, v);
        const Mat4 m = md * mc.inverse();
        out[v] = m.topLeftCorner<3, 3>() * vertices[v] + m.topRightCorner<3, 1>();
    }
    if (bad_vertex >= 0)
        throw Error("rebase_canonical: blended canonical matrix singular at vertex " +
                    std::to_string(bad_vertex.load()));
    return out;
}

AlignResult align_generated_to_reference(const TriMesh& gen, const TriMesh& ref_posed) {
    if (gen.vertices.empty() || ref_posed.vertices.empty())
        throw Error("align_generated_to_reference: empty mesh");

    PointCloud src;
    src.points = gen.vertices;
    const PointCloud dst = sample_surface(ref_posed, 10000, 12345);

    SimilarityTransform seed;
    const double gr = std::max(gen.rms_radius(), 1e-12);
    seed.scale = ref_posed.rms_radius() / gr;
    seed.rigid.t = ref_posed.centroid() - seed.scale * gen.centroid();

    IcpParams params;
    params.variant = IcpVariant::PointToPoint;
    const ScaledIcpResult r = icp_similarity(src, dst, seed, params);
    return {r.transform, r.converged, r.residual};
}

TransferredWeights transfer_skinning_weights(const TriMesh& gen_aligned,
                                             const TriMesh& ref_posed,
                                             const SkinnedRig& rig) {
    if (rig.weights.size() != ref_posed.vertices.size())
        throw Error("transfer_skinning_weights: rig weights do not match reference mesh");
    TransferredWeights out(gen_aligned.vertices.size());
#pragma omp parallel for schedule(static)
    for (long long v = 0; v < static_cast<long long>(gen_aligned.vertices.size()); ++v) {
        Vec3 bary;
        const int face = closest_point_on_mesh(ref_posed, gen_aligned.vertices[v], nullptr, &bary);
        const auto& f = ref_posed.faces[face];
        std::map<int, double> merged;
        for (int k = 0; k < 3; ++k)
            for (const auto& [bone, w] : rig.weights[f[k]]) merged[bone] += bary[k] * w;
        double sum = 0;
        for (const auto& [bone, w] : merged) sum += w;
        auto& row = out[v];
        row.reserve(merged.size());
        for (const auto& [bone, w] : merged)
            if (w > 0) row.emplace_back(bone, w / sum);
    }
    return out;
}

std::vector<TriMesh> deform_sequence(const TriMesh& gen, const TransferredWeights& w_prime,
                                     const SkinnedRig& rig,
                                     const std::vector<PoseParams>& poses,
                                     int canonical_frame) {
    if (canonical_frame < 0 || canonical_frame >= static_cast<int>(poses.size()))
        throw Error("deform_sequence: canonical frame " + std::to_string(canonical_frame) +
                    " out of range");
    const BoneTransforms B_c = compute_bone_transforms(rig, poses[canonical_frame]);
    std::vector<TriMesh> out(poses.size());
    for (std::size_t t = 0; t < poses.size(); ++t) {
        const BoneTransforms B_d = compute_bone_transforms(rig, poses[t]);
        TriMesh frame = gen;
        try {
            frame.vertices = rebase_canonical(gen.vertices, w_prime, B_c, B_d);
        } catch (const Error& e) {
            throw Error("frame " + std::to_string(t) + ": " + e.what());
        }
        out[t] = std::move(frame);
    }
    return out;
}

SkinnedRig load_rig(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open rig " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("malformed rig JSON " + path + ": " + e.what());
    }
    SkinnedRig rig;
    rig.n_b = j.at("n_b").get<int>();
    rig.parents = j.at("parents").get<std::vector<int>>();
    for (const auto& jm : j.at("rest_transforms")) {
        const auto vals = jm.get<std::vector<double>>();
        if (vals.size() != 16) throw Error("rig " + path + ": rest transform is not 4x4");
        Mat4 m;
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) m(r, c) = vals[4 * r + c];
        rig.rest_transforms.push_back(m);
    }
    rig.inverse_bind.reserve(rig.rest_transforms.size());
    for (const auto& m : rig.rest_transforms) rig.inverse_bind.push_back(m.inverse());
    for (const auto& jrow : j.at("weights")) {
        std::vector<std::pair<int, double>> row;
        for (const auto& jp : jrow) row.emplace_back(jp.at(0).get<int>(), jp.at(1).get<double>());
        rig.weights.push_back(std::move(row));
    }
    rig.check_valid();
    return rig;
}

void save_rig(const SkinnedRig& rig, const std::string& path) {
    json j;
    j["n_b"] = rig.n_b;
    j["parents"] = rig.parents;
    j["rest_transforms"] = json::array();
    for (const auto& m : rig.rest_transforms) {
        std::vector<double> vals(16);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) vals[4 * r + c] = m(r, c);
        j["rest_transforms"].push_back(vals);
    }
    j["weights"] = json::array();
    for (const auto& row : rig.weights) {
        json jrow = json::array();
        for (const auto& [bone, w] : row) jrow.push_back({bone, w});
        j["weights"].push_back(jrow);
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write rig " + path);
    f << j.dump() << "\n";
}

std::vector<PoseParams> load_poses(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open poses " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("malformed pose JSON " + path + ": " + e.what());
    }
    std::vector<PoseParams> out;
    for (const auto& jp : j) {
        PoseParams p;
        for (const auto& jr : jp.at("joint_rotations")) {
            const auto v = jr.get<std::vector<double>>();
            if (v.size() != 3) throw Error("pose " + path + ": joint rotation is not a 3-vector");
            p.joint_rotations.emplace_back(v[0], v[1], v[2]);
        }
        const auto rt = jp.at("root_translation").get<std::vector<double>>();
        if (rt.size() != 3) throw Error("pose " + path + ": root_translation is not a 3-vector");
        p.root_translation = Vec3(rt[0], rt[1], rt[2]);
        out.push_back(std::move(p));
    }
    return out;
}

void save_poses(const std::vector<PoseParams>& poses, const std::string& path) {
    json j = json::array();
    for (const auto& p : poses) {
        json jp;
        jp["joint_rotations"] = json::array();
        for (const auto& r : p.joint_rotations) jp["joint_rotations"].push_back({r.x(), r.y(), r.z()});
        jp["root_translation"] = {p.root_translation.x(), p.root_translation.y(),
                                  p.root_translation.z()};
        j.push_back(jp);
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write poses " + path);
    f << j.dump() << "\n";
}

}  // namespace adsr
