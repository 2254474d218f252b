#include "adsr/splats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "adsr/error.hpp"

namespace adsr {

namespace {

constexpr int kTileSize = 16;
constexpr double kNearPlane = 1e-4;
constexpr double kLowPass = 0.3;           // px^2 isotropic
constexpr double kMahalanobisCut = 9.0;    // 3 sigma
constexpr double kAlphaClamp = 0.999;
constexpr double kMinTransmittance = 1e-4;
constexpr int kMaxObjectIds = 256;

struct Prepared {
    Eigen::Vector2d mean;
    Eigen::Matrix2d inv_cov;
    double z;
    double opacity;
    Eigen::Vector3f color;
    int object_id;
    int x0, x1, y0, y1;  // inclusive pixel bbox of the 3-sigma extent
    int index;
};

/// Projects and prunes splats, producing the shared per-splat render state in
/// a global front-to-back order (z, then original index).
std::vector<Prepared> prepare(const GaussianSet& g, const Camera& camera,
                              const std::vector<int>* ids) {
    std::vector<Prepared> out;
    out.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const ProjectedSplat p = project_gaussian(g.means[i], g.scales[i], g.orientations[i], camera);
        if (p.culled) continue;
        const double det = p.cov.determinant();
        if (!(det > 0) || !p.cov.allFinite()) continue;
        Prepared s;
        s.mean = p.mean;
        s.inv_cov = p.cov.inverse();
        s.z = p.z;
        s.opacity = g.opacities[i];
        s.color = g.colors[i].cast<float>();
        s.object_id = ids ? (*ids)[i] : 0;
        s.index = static_cast<int>(i);

        const double mid = 0.5 * p.cov.trace();
        const double lmax = mid + std::sqrt(std::max(mid * mid - det, 0.0));
        const double r = 3.0 * std::sqrt(lmax);
        s.x0 = std::max(0, static_cast<int>(std::floor(p.mean.x() - r)));
        s.x1 = std::min(camera.width - 1, static_cast<int>(std::ceil(p.mean.x() + r)));
        s.y0 = std::max(0, static_cast<int>(std::floor(p.mean.y() - r)));
        s.y1 = std::min(camera.height - 1, static_cast<int>(std::ceil(p.mean.y() + r)));
        if (s.x0 > s.x1 || s.y0 > s.y1) continue;
        out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const Prepared& a, const Prepared& b) {
        return a.z != b.z ? a.z < b.z : a.index < b.index;
    });
    return out;
}

/// Front-to-back fold at one pixel over an already-sorted candidate list.
template <typename Iter>
void composite_pixel(int x, int y, Iter begin, Iter end, RenderOutput& out) {
    double T = 1.0;
    Eigen::Vector3f color = Eigen::Vector3f::Zero();
    double depth = 0.0;
    double id_weight[kMaxObjectIds] = {};
    for (Iter it = begin; it != end; ++it) {
        const Prepared& s = *it;
        if (x < s.x0 || x > s.x1 || y < s.y0 || y > s.y1) continue;
        const Eigen::Vector2d d(x - s.mean.x(), y - s.mean.y());
        const double maha = d.dot(s.inv_cov * d);
        if (maha > kMahalanobisCut) continue;
        const double alpha = std::min(s.opacity * std::exp(-0.5 * maha), kAlphaClamp);
        const double w = T * alpha;
        color += static_cast<float>(w) * s.color;
        depth += w * s.z;
        id_weight[s.object_id % kMaxObjectIds] += w;
        T *= 1.0 - alpha;
        if (T < kMinTransmittance) break;
    }
    out.color.at(x, y) = color;
    out.depth.at(x, y) = static_cast<float>(depth);
    out.alpha.at(x, y) = static_cast<float>(1.0 - T);
    // dominant contributor; background (final transmittance) wins ties
    int best_id = 0;
    double best_w = T;
    for (int id = 1; id < kMaxObjectIds; ++id)
        if (id_weight[id] > best_w) {
            best_w = id_weight[id];
            best_id = id;
        }
    out.object_id.at(x, y) = static_cast<std::uint8_t>(best_id);
}

RenderOutput make_output(const Camera& camera) {
    RenderOutput out;
    out.color = ImageRGB(camera.width, camera.height);
    out.depth = DepthGrid(camera.width, camera.height, 0.0f);
    out.alpha = Grid<float>(camera.width, camera.height, 0.0f);
    out.object_id = MaskGrid(camera.width, camera.height, 0);
    return out;
}

}  // namespace

void GaussianSet::append(const GaussianSet& other) {
    means.insert(means.end(), other.means.begin(), other.means.end());
    scales.insert(scales.end(), other.scales.begin(), other.scales.end());
    orientations.insert(orientations.end(), other.orientations.begin(), other.orientations.end());
    opacities.insert(opacities.end(), other.opacities.begin(), other.opacities.end());
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
}

Vec3 GaussianSet::centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& m : means) c += m;
    return means.empty() ? c : Vec3(c / double(means.size()));
}

RigidTransform CorrectivePose::to_rigid() const {
    RigidTransform T;
    T.R = axis_angle_to_matrix(delta_rotation);
    T.t = pivot + delta_translation - T.R * pivot;
    return T;
}

GaussianSet apply_corrective(const GaussianSet& g, const CorrectivePose& pose) {
    const Mat3 dR = axis_angle_to_matrix(pose.delta_rotation);
    GaussianSet out = g;
    for (auto& m : out.means) m = dR * (m - pose.pivot) + pose.pivot + pose.delta_translation;
    for (auto& o : out.orientations) o = dR * o;
    return out;
}

GaussianSet init_gaussians_from_mesh(const TriMesh& mesh, double opacity) {
    if (mesh.vertices.empty()) throw Error("init_gaussians_from_mesh: empty mesh");
    const std::size_t n = mesh.vertices.size();

    // mean incident edge length per vertex, over unique edges
    std::vector<double> edge_sum(n, 0.0);
    std::vector<int> edge_count(n, 0);
    std::map<std::pair<int, int>, double> edges;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges[{a, b}] = (mesh.vertices[a] - mesh.vertices[b]).norm();
        }
    }
    for (const auto& [e, len] : edges) {
        edge_sum[e.first] += len;
        edge_count[e.first]++;
        edge_sum[e.second] += len;
        edge_count[e.second]++;
    }

    double fallback = 0.01;
    if (!edges.empty()) {
        double total = 0;
        for (const auto& [e, len] : edges) total += len;
        fallback = total / double(edges.size());
    }

    GaussianSet g;
    g.means = mesh.vertices;
    g.scales.resize(n);
    g.orientations.assign(n, Mat3::Identity());
    g.opacities.assign(n, opacity);
    g.colors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double mean_edge = edge_count[i] ? edge_sum[i] / edge_count[i] : fallback;
        g.scales[i] = Vec3::Constant(0.5 * mean_edge);
        g.colors[i] = mesh.has_colors() ? mesh.vertex_colors[i] : Vec3::Constant(0.5);
    }
    return g;
}

ProjectedSplat project_gaussian(const Vec3& mean, const Vec3& scale, const Mat3& orient,
                                const Camera& camera) {
    ProjectedSplat out;
    const Vec3 pc = camera.world_to_cam(mean);
    if (pc.z() <= kNearPlane) {
        out.culled = true;
        return out;
    }
    out.z = pc.z();
    out.mean = camera.project_cam(pc);

    const Mat3 cov3 = orient * scale.asDiagonal() * scale.asDiagonal() * orient.transpose();
    Eigen::Matrix<double, 2, 3> J;
    const double iz = 1.0 / pc.z(), iz2 = iz * iz;
    J << camera.fx * iz, 0, -camera.fx * pc.x() * iz2,
         0, camera.fy * iz, -camera.fy * pc.y() * iz2;
    const Eigen::Matrix<double, 2, 3> JW = J * camera.world_to_camera.R;
    out.cov = JW * cov3 * JW.transpose() + kLowPass * Eigen::Matrix2d::Identity();
    return out;
}

RenderOutput rasterize(const GaussianSet& g, const Camera& camera,
                       const std::vector<int>* splat_object_ids) {
    RenderOutput out = make_output(camera);
    const std::vector<Prepared> splats = prepare(g, camera, splat_object_ids);
    if (splats.empty()) return out;

    const int tiles_x = (camera.width + kTileSize - 1) / kTileSize;
    const int tiles_y = (camera.height + kTileSize - 1) / kTileSize;
    const int n_tiles = tiles_x * tiles_y;

#pragma omp parallel for schedule(dynamic)
    for (int tile = 0; tile < n_tiles; ++tile) {
        const int tx = tile % tiles_x, ty = tile / tiles_x;
        const int px0 = tx * kTileSize, py0 = ty * kTileSize;
        const int px1 = std::min(px0 + kTileSize, camera.width) - 1;
        const int py1 = std::min(py0 + kTileSize, camera.height) - 1;

        // bin: splats whose bbox touches this tile, order preserved from the
        // global sort so compositing matches the reference exactly
        std::vector<Prepared> local;
        for (const auto& s : splats)
            if (s.x1 >= px0 && s.x0 <= px1 && s.y1 >= py0 && s.y0 <= py1) local.push_back(s);
        for (int y = py0; y <= py1; ++y)
            for (int x = px0; x <= px1; ++x)
                composite_pixel(x, y, local.begin(), local.end(), out);
    }
    return out;
}

RenderOutput rasterize_reference(const GaussianSet& g, const Camera& camera,
                                 const std::vector<int>* splat_object_ids) {
    RenderOutput out = make_output(camera);
    const std::vector<Prepared> splats = prepare(g, camera, splat_object_ids);
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x)
            composite_pixel(x, y, splats.begin(), splats.end(), out);
    return out;
}

}  // namespace adsr
