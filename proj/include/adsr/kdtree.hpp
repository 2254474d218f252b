#pragma once

#include <limits>
#include <vector>

#include "adsr/transform.hpp"

namespace adsr {

/// Static 3D kd-tree for nearest-neighbor queries. Built once, queried
/// read-only from any number of threads.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(const std::vector<Vec3>& points) { build(points); }

    void build(const std::vector<Vec3>& points);

    bool empty() const { return nodes_.empty(); }

    /// Index of the nearest point and its squared distance. Returns -1 when
    /// the tree is empty or nothing lies within max_dist.
    int nearest(const Vec3& q, double* sq_dist = nullptr,
                double max_dist = std::numeric_limits<double>::infinity()) const;

    /// Indices of the k nearest points, closest first.
    std::vector<int> knearest(const Vec3& q, int k) const;

private:
    struct Node {
        Vec3 point;
        int index = -1;  // index into the original point list
        int left = -1, right = -1;
        int axis = 0;
    };
    std::vector<Node> nodes_;
    int root_ = -1;

    int build_rec(std::vector<int>& order, int lo, int hi, int depth,
                  const std::vector<Vec3>& pts);
};

}  // namespace adsr
