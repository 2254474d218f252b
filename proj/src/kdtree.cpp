#include "adsr/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace adsr {

void KdTree::build(const std::vector<Vec3>& points) {
    nodes_.clear();
    nodes_.reserve(points.size());
    root_ = -1;
    if (points.empty()) return;
    std::vector<int> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    root_ = build_rec(order, 0, static_cast<int>(order.size()), 0, points);
}

int KdTree::build_rec(std::vector<int>& order, int lo, int hi, int depth,
                      const std::vector<Vec3>& pts) {
    if (lo >= hi) return -1;
    const int axis = depth % 3;
    const int mid = (lo + hi) / 2;
    std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                     [&](int a, int b) { return pts[a][axis] < pts[b][axis]; });
    Node node;
    node.point = pts[order[mid]];
    node.index = order[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build_rec(order, lo, mid, depth + 1, pts);
    const int right = build_rec(order, mid + 1, hi, depth + 1, pts);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

int KdTree::nearest(const Vec3& q, double* sq_dist, double max_dist) const {
    if (root_ < 0) return -1;
    double best = max_dist * max_dist;
    int best_idx = -1;

    // recursive descent, near side first; ties broken toward lower index
    auto visit = [&](auto&& self, int ni) -> void {
        if (ni < 0) return;
        const Node& n = nodes_[ni];
        const double d = (n.point - q).squaredNorm();
        if (d < best || (d == best && best_idx >= 0 && n.index < best_idx)) {
            best = d;
            best_idx = n.index;
        }
        const double delta = q[n.axis] - n.point[n.axis];
        const int near = delta < 0 ? n.left : n.right;
        const int far = delta < 0 ? n.right : n.left;
        self(self, near);
        if (delta * delta <= best) self(self, far);
    };
    visit(visit, root_);
    if (sq_dist) *sq_dist = best;
    return best_idx;
}

std::vector<int> KdTree::knearest(const Vec3& q, int k) const {
    // max-heap of (sq_dist, index)
    std::priority_queue<std::pair<double, int>> heap;
    auto visit = [&](auto&& self, int ni) -> void {
        if (ni < 0) return;
        const Node& n = nodes_[ni];
        const double d = (n.point - q).squaredNorm();
        if (static_cast<int>(heap.size()) < k) {
            heap.emplace(d, n.index);
        } else if (d < heap.top().first) {
            heap.pop();
            heap.emplace(d, n.index);
        }
        const double delta = q[n.axis] - n.point[n.axis];
        const int near = delta < 0 ? n.left : n.right;
        const int far = delta < 0 ? n.right : n.left;
        self(self, near);
        if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().first)
            self(self, far);
    };
    if (root_ >= 0 && k > 0) visit(visit, root_);
    std::vector<int> out(heap.size());
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        *it = heap.top().second;
        heap.pop();
    }
    return out;
}

}  // namespace adsr
