#include "adsr/icp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "adsr/error.hpp"
#include "adsr/kdtree.hpp"
#include "adsr/log.hpp"

using nlohmann::json;

namespace adsr {

void IcpParams::check_valid() const {
    if (max_iterations < 1) throw Error("icp: max_iterations must be >= 1");
    if (convergence_tol <= 0) throw Error("icp: convergence_tol must be positive");
    if (correspondence_rejection <= 1) throw Error("icp: rejection multiple must be > 1");
}

PointCloud backproject_depth(const DepthGrid& depth, const MaskGrid& mask,
                             const Camera& camera, int mask_id) {
    if (depth.width != camera.width || depth.height != camera.height)
        throw Error("backproject_depth: depth raster size does not match camera");
    if (mask.width != depth.width || mask.height != depth.height)
        throw Error("backproject_depth: mask size does not match depth raster");
    const RigidTransform cam_to_world = camera.world_to_camera.inverse();
    PointCloud out;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const std::uint8_t m = mask.at(u, v);
            if (mask_id == 0 ? m == 0 : m != mask_id) continue;
            const float d = depth.at(u, v);
            if (!std::isfinite(d) || d <= 0) continue;
            out.points.push_back(cam_to_world.apply(camera.backproject_cam(u, v, d)));
        }
    }
    if (out.points.empty())
        throw Error("backproject_depth: no valid masked pixel" +
                    (mask_id ? " for mask id " + std::to_string(mask_id) : std::string()));
    return out;
}

void estimate_normals(PointCloud& cloud, int k, const Vec3& viewpoint) {
    const KdTree tree(cloud.points);
    cloud.normals.resize(cloud.points.size());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(cloud.points.size()); ++i) {
        const auto nn = tree.knearest(cloud.points[i], k);
        Vec3 mean = Vec3::Zero();
        for (int j : nn) mean += cloud.points[j];
        mean /= double(nn.size());
        Mat3 cov = Mat3::Zero();
        for (int j : nn) {
            const Vec3 d = cloud.points[j] - mean;
            cov += d * d.transpose();
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
        Vec3 n = eig.eigenvectors().col(0);  // smallest eigenvalue
        if (n.dot(viewpoint - cloud.points[i]) < 0) n = -n;
        cloud.normals[i] = n;
    }
}

namespace {

struct Correspondences {
    std::vector<int> src_idx;
    std::vector<int> dst_idx;
    double rmse = 0;
};

void check_nondegenerate(const std::vector<Vec3>& pts, const char* which) {
    if (pts.size() < 3) throw Error(std::string("icp: ") + which + " cloud has < 3 points");
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= double(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
        const Vec3 d = p - mean;
        cov += d * d.transpose();
    }
    Eigen::JacobiSVD<Mat3> svd(cov);
    const auto& s = svd.singularValues();
    if (s(2) <= 1e-9 * s(0))
        throw Error(std::string("icp: degenerate ") + which + " cloud (covariance rank < 3)");
}

/// NN correspondences of moved src points into dst, with the distance cap and
/// median-multiple rejection applied.
Correspondences find_correspondences(const std::vector<Vec3>& moved, const KdTree& dst_tree,
                                     const IcpParams& params) {
    Correspondences out;
    std::vector<double> dists;
    std::vector<int> src_all, dst_all;
    for (std::size_t i = 0; i < moved.size(); ++i) {
        double sq;
        const int j = dst_tree.nearest(moved[i], &sq, params.max_correspondence_dist);
        if (j < 0) continue;
        src_all.push_back(static_cast<int>(i));
        dst_all.push_back(j);
        dists.push_back(std::sqrt(sq));
    }
    if (dists.empty()) return out;
    std::vector<double> sorted = dists;
    const std::size_t mid = sorted.size() / 2;
    std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
    const double cutoff = params.correspondence_rejection * std::max(sorted[mid], 1e-300);
    double sq_sum = 0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        if (dists[i] > cutoff) continue;
        out.src_idx.push_back(src_all[i]);
        out.dst_idx.push_back(dst_all[i]);
        sq_sum += dists[i] * dists[i];
    }
    if (!out.src_idx.empty()) out.rmse = std::sqrt(sq_sum / double(out.src_idx.size()));
    return out;
}

/// Umeyama closed-form alignment of paired points; optional uniform scale.
void fit_point_to_point(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                        bool with_scale, Mat3* R, Vec3* t, double* s) {
    const std::size_t n = src.size();
    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mu_s += src[i];
        mu_d += dst[i];
    }
    mu_s /= double(n);
    mu_d /= double(n);
    Mat3 sigma = Mat3::Zero();
    double var_s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 ds = src[i] - mu_s;
        sigma += (dst[i] - mu_d) * ds.transpose();
        var_s += ds.squaredNorm();
    }
    sigma /= double(n);
    var_s /= double(n);
    Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 S = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) S(2, 2) = -1;
    *R = svd.matrixU() * S * svd.matrixV().transpose();
    *s = with_scale ? (svd.singularValues().dot(S.diagonal())) / std::max(var_s, 1e-300) : 1.0;
    *t = mu_d - *s * (*R * mu_s);
}

/// Linearized point-to-plane step: small-angle rotation + translation,
/// solved about the source centroid (far-from-origin data otherwise makes
/// the normal equations hopelessly ill-conditioned), lightly damped.
void fit_point_to_plane(const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                        const std::vector<Vec3>& normals, Mat3* R, Vec3* t) {
    Vec3 c = Vec3::Zero();
    for (const auto& p : src) c += p;
    c /= double(src.size());

    Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> b = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const Vec3& n = normals[i];
        Eigen::Matrix<double, 6, 1> J;
        J.head<3>() = (src[i] - c).cross(n);
        J.tail<3>() = n;
        const double r = n.dot(dst[i] - src[i]);
        A += J * J.transpose();
        b += r * J;
    }
    A += (1e-9 * A.trace() + 1e-12) * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 1> x = A.ldlt().solve(b);
    *R = axis_angle_to_matrix(x.head<3>());
    *t = x.tail<3>() + c - *R * c;
}

double post_rmse(const std::vector<Vec3>& src_pts, const std::vector<Vec3>& dst_pts) {
    double s = 0;
    for (std::size_t i = 0; i < src_pts.size(); ++i) s += (src_pts[i] - dst_pts[i]).squaredNorm();
    return std::sqrt(s / double(src_pts.size()));
}

}  // namespace

IcpResult icp_rigid(const PointCloud& src, const PointCloud& dst,
                    const RigidTransform& init, const IcpParams& params) {
    params.check_valid();
    check_nondegenerate(src.points, "source");
    if (dst.points.size() < 3) throw Error("icp: destination cloud has < 3 points");

    IcpResult result;
    result.transform = init;
    IcpVariant variant = params.variant;
    if (variant == IcpVariant::PointToPlane && !dst.has_normals()) {
        variant = IcpVariant::PointToPoint;
        result.plane_fallback = true;
        log_warn("icp: point-to-plane requested without destination normals; "
                 "falling back to point-to-point");
    }

    const KdTree dst_tree(dst.points);
    double prev_rmse = std::numeric_limits<double>::infinity();
    double best_rmse = std::numeric_limits<double>::infinity();
    RigidTransform best = init;

    std::vector<Vec3> moved(src.points.size());
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        for (std::size_t i = 0; i < src.points.size(); ++i)
            moved[i] = result.transform.apply(src.points[i]);
        const Correspondences corr = find_correspondences(moved, dst_tree, params);
        if (corr.src_idx.size() < 3) break;

        std::vector<Vec3> a(corr.src_idx.size()), b(corr.src_idx.size());
        for (std::size_t i = 0; i < corr.src_idx.size(); ++i) {
            a[i] = moved[corr.src_idx[i]];
            b[i] = dst.points[corr.dst_idx[i]];
        }
        RigidTransform delta;
        if (variant == IcpVariant::PointToPoint) {
            double s;
            fit_point_to_point(a, b, false, &delta.R, &delta.t, &s);
        } else {
            std::vector<Vec3> n(corr.src_idx.size());
            for (std::size_t i = 0; i < corr.src_idx.size(); ++i)
                n[i] = dst.normals[corr.dst_idx[i]];
            fit_point_to_plane(a, b, n, &delta.R, &delta.t);
        }
        result.transform = compose(delta, result.transform);

        for (std::size_t i = 0; i < a.size(); ++i) a[i] = delta.apply(a[i]);
        const double rmse = post_rmse(a, b);
        result.residual = rmse;
        if (rmse <= best_rmse) {
            best_rmse = rmse;
            best = result.transform;
            if (result.rmse_trace.empty() || rmse <= result.rmse_trace.back())
                result.rmse_trace.push_back(rmse);
        }
        if (std::abs(prev_rmse - rmse) < params.convergence_tol) {
            result.converged = true;
            break;
        }
        prev_rmse = rmse;
    }
    result.transform = best;
    result.residual = std::isfinite(best_rmse) ? best_rmse : result.residual;
    return result;
}

ScaledIcpResult icp_similarity(const PointCloud& src, const PointCloud& dst,
                               const SimilarityTransform& init, const IcpParams& params) {
    params.check_valid();
    check_nondegenerate(src.points, "source");
    if (dst.points.size() < 3) throw Error("icp: destination cloud has < 3 points");

    ScaledIcpResult result;
    result.transform = init;
    const KdTree dst_tree(dst.points);
    double prev_rmse = std::numeric_limits<double>::infinity();
    double best_rmse = std::numeric_limits<double>::infinity();
    SimilarityTransform best = init;

    std::vector<Vec3> moved(src.points.size());
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        for (std::size_t i = 0; i < src.points.size(); ++i)
            moved[i] = result.transform.apply(src.points[i]);
        const Correspondences corr = find_correspondences(moved, dst_tree, params);
        if (corr.src_idx.size() < 3) break;

        std::vector<Vec3> a(corr.src_idx.size()), b(corr.src_idx.size());
        for (std::size_t i = 0; i < corr.src_idx.size(); ++i) {
            a[i] = moved[corr.src_idx[i]];
            b[i] = dst.points[corr.dst_idx[i]];
        }
        SimilarityTransform delta;
        fit_point_to_point(a, b, true, &delta.rigid.R, &delta.rigid.t, &delta.scale);
        result.transform = compose(delta, result.transform);

        for (std::size_t i = 0; i < a.size(); ++i) a[i] = delta.apply(a[i]);
        const double rmse = post_rmse(a, b);
        result.residual = rmse;
        if (rmse <= best_rmse) {
            best_rmse = rmse;
            best = result.transform;
        }
        if (std::abs(prev_rmse - rmse) < params.convergence_tol) {
            result.converged = true;
            break;
        }
        prev_rmse = rmse;
    }
    result.transform = best;
    result.residual = std::isfinite(best_rmse) ? best_rmse : result.residual;
    return result;
}

namespace {

/// Similarity ICP of a sampled canonical surface onto an observed depth cloud
/// (transform maps canonical to world). Forward pairs pull every cloud point
/// onto the surface; reverse pairs penalize surface samples the camera should
/// have seen but that contradict the depth observation. The gate excuses
/// samples that fall outside the image or behind the observed surface, so a
/// free scale can neither collapse onto the visible shell nor grow past it.
ScaledIcpResult fit_similarity_visible(const PointCloud& samples, const PointCloud& cloud,
                                       const DepthGrid& depth, const MaskGrid& mask,
                                       const Camera& camera, int mask_id,
                                       const SimilarityTransform& init,
                                       const IcpParams& params) {
    check_nondegenerate(samples.points, "source");
    const KdTree cloud_tree(cloud.points);
    const double margin = std::max(0.01, 0.05 * cloud.rms_radius());

    ScaledIcpResult result;
    result.transform = init;
    double prev_rmse = std::numeric_limits<double>::infinity();
    double best_rmse = std::numeric_limits<double>::infinity();
    SimilarityTransform best = init;

    std::vector<Vec3> moved(samples.points.size());
    for (int iter = 0; iter < params.max_iterations; ++iter) {
        for (std::size_t i = 0; i < samples.points.size(); ++i)
            moved[i] = result.transform.apply(samples.points[i]);
        const KdTree moved_tree(moved);

        // every cloud point comes from this object's mask, so all of them must
        // be explained: no rejection on the forward pairs
        std::vector<Vec3> ka, kb;  // ka = moved surface side, kb = cloud side
        for (std::size_t i = 0; i < cloud.points.size(); ++i) {
            double sq;
            const int j = moved_tree.nearest(cloud.points[i], &sq);
            ka.push_back(moved[j]);
            kb.push_back(cloud.points[i]);
        }

        for (std::size_t i = 0; i < moved.size(); ++i) {
            const Vec3 pc = camera.world_to_cam(moved[i]);
            if (pc.z() <= 1e-6) continue;
            const Eigen::Vector2d uv = camera.project_cam(pc);
            const int u = int(std::lround(uv.x())), v = int(std::lround(uv.y()));
            if (!depth.in_bounds(u, v)) continue;  // outside the image: excused
            const float d = depth.at(u, v);
            const bool own_pixel =
                mask_id == 0 ? mask.at(u, v) != 0 : mask.at(u, v) == mask_id;
            if (std::isfinite(d) && pc.z() > d + margin) continue;  // occluded
            if (own_pixel && std::isfinite(d) && std::abs(pc.z() - d) <= margin)
                continue;  // consistent with the observation, forward pairs cover it
            // should be visible yet contradicts the observation
            double sq;
            const int j = cloud_tree.nearest(moved[i], &sq);
            ka.push_back(moved[i]);
            kb.push_back(cloud.points[j]);
        }
        if (ka.size() < 3) break;

        SimilarityTransform delta;
        fit_point_to_point(ka, kb, true, &delta.rigid.R, &delta.rigid.t, &delta.scale);
        result.transform = compose(delta, result.transform);

        for (auto& p : ka) p = delta.apply(p);
        const double rmse = post_rmse(ka, kb);
        result.residual = rmse;
        if (rmse <= best_rmse) {
            best_rmse = rmse;
            best = result.transform;
        }
        if (std::abs(prev_rmse - rmse) < params.convergence_tol) {
            result.converged = true;
            break;
        }
        prev_rmse = rmse;
    }
    result.transform = best;
    result.residual = std::isfinite(best_rmse) ? best_rmse : result.residual;
    return result;
}

}  // namespace

ScaledIcpResult fit_canonical_alignment(const TriMesh& canonical_mesh,
                                        const PointCloud& canonical_cloud,
                                        const MaskGrid& mask, const DepthGrid& depth,
                                        const Camera& camera, const IcpParams& params,
                                        int mask_id) {
    if (canonical_cloud.points.empty()) throw Error("fit_canonical_alignment: empty cloud");

    // median masked depth gives the coarse anchor point (pixel achieving it)
    struct Px { float d; int u, v; };
    std::vector<Px> px;
    for (int v = 0; v < depth.height; ++v)
        for (int u = 0; u < depth.width; ++u) {
            const std::uint8_t m = mask.at(u, v);
            if (mask_id == 0 ? m == 0 : m != mask_id) continue;
            const float d = depth.at(u, v);
            if (std::isfinite(d) && d > 0) px.push_back({d, u, v});
        }
    if (px.empty()) throw Error("fit_canonical_alignment: no valid masked depth pixel");
    const std::size_t mid = px.size() / 2;
    std::nth_element(px.begin(), px.begin() + mid, px.end(),
                     [](const Px& a, const Px& b) { return a.d < b.d; });
    const Px med = px[mid];
    const Vec3 anchor = camera.world_to_camera.inverse().apply(
        camera.backproject_cam(med.u, med.v, med.d));

    const PointCloud samples = sample_surface(canonical_mesh, 10000, 777);
    const double scale_seed =
        canonical_cloud.rms_radius() / std::max(samples.rms_radius(), 1e-12);

    IcpParams p = params;
    p.variant = IcpVariant::PointToPoint;

    // The anchor lies on the visible surface; the object center sits behind it
    // along the viewing ray by up to ~one rms radius. Multi-start over that
    // offset and keep the best fit.
    const Vec3 cam_center = camera.world_to_camera.inverse().t;
    const Vec3 ray = (anchor - cam_center).normalized();
    ScaledIcpResult out;
    double best = std::numeric_limits<double>::infinity();
    for (const double k : {0.0, 0.5, 1.0, 1.5}) {
        SimilarityTransform seed;
        seed.scale = scale_seed;
        seed.rigid.t = anchor + k * samples.rms_radius() * ray - seed.scale * samples.centroid();
        const ScaledIcpResult fit = fit_similarity_visible(
            samples, canonical_cloud, depth, mask, camera, mask_id, seed, p);
        if (fit.residual < best) {
            best = fit.residual;
            out = fit;
        }
    }
    return out;
}

TrackResult chain_track(const std::vector<PointCloud>& clouds, int canonical_idx,
                        const IcpParams& params) {
    const int n = static_cast<int>(clouds.size());
    if (canonical_idx < 0 || canonical_idx >= n)
        throw Error("chain_track: canonical index out of range");

    TrackResult result;
    result.transforms.assign(n, RigidTransform::identity());
    result.residuals.assign(n, 0.0);
    result.converged.assign(n, true);

    if (clouds[canonical_idx].points.empty()) result.converged[canonical_idx] = false;

    auto track_direction = [&](int step) {
        RigidTransform pair_seed;  // previous pair's result, constant-motion prior
        int last_good = clouds[canonical_idx].points.empty() ? -1 : canonical_idx;
        for (int t = canonical_idx + step; t >= 0 && t < n; t += step) {
            const int prev = t - step;
            if (clouds[t].points.empty() || last_good < 0) {
                // occluded frame inherits the nearest tracked transform
                result.transforms[t] = result.transforms[prev];
                result.residuals[t] = result.residuals[prev];
                result.converged[t] = false;
                if (!clouds[t].points.empty() && last_good < 0) last_good = t;
                continue;
            }
            IcpResult icp = icp_rigid(clouds[last_good], clouds[t], pair_seed, params);
            result.transforms[t] = compose(icp.transform, result.transforms[last_good]);
            result.residuals[t] = icp.residual;
            result.converged[t] = icp.converged;
            pair_seed = icp.transform;
            last_good = t;
        }
    };
    track_direction(+1);
    track_direction(-1);
    return result;
}

void save_track(const TrackResult& r, const std::string& path) {
    json frames = json::array();
    for (std::size_t i = 0; i < r.transforms.size(); ++i) {
        std::vector<double> R(9);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) R[3 * a + b] = r.transforms[i].R(a, b);
        frames.push_back({{"R", R},
                          {"t", {r.transforms[i].t.x(), r.transforms[i].t.y(),
                                 r.transforms[i].t.z()}},
                          {"residual", r.residuals[i]},
                          {"converged", static_cast<bool>(r.converged[i])}});
    }
    std::ofstream f(path);
    if (!f) throw Error("cannot write track " + path);
    f << json{{"frames", frames}}.dump(2) << "\n";
}

TrackResult load_track(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open track " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw Error("malformed track JSON " + path + ": " + e.what());
    }
    TrackResult r;
    for (const auto& jf : j.at("frames")) {
        RigidTransform T;
        const auto R = jf.at("R").get<std::vector<double>>();
        const auto t = jf.at("t").get<std::vector<double>>();
        if (R.size() != 9 || t.size() != 3) throw Error("track " + path + ": R/t wrong size");
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) T.R(a, b) = R[3 * a + b];
        T.t = Vec3(t[0], t[1], t[2]);
        r.transforms.push_back(T);
        r.residuals.push_back(jf.at("residual").get<double>());
        r.converged.push_back(jf.at("converged").get<bool>());
    }
    return r;
}

}  // namespace adsr
