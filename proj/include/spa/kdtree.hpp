#pragma once

#include "spa/common.hpp"

namespace spa {

/// Exact k-nearest-neighbor index over fixed-dimension points, built once
/// and immutable afterwards. Median-split kd-tree; queries return indices
/// ordered by ascending distance (ties by ascending index).
template <int Dim>
class KdTree {
 public:
  using Point = Eigen::Matrix<double, Dim, 1>;

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)) {
    if (points_.empty()) throw std::invalid_argument("KdTree: no points");
    order_.resize(points_.size());
    for (size_t i = 0; i < points_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(points_.size());
    root_ = build(0, static_cast<int>(points_.size()));
  }

  size_t size() const { return points_.size(); }

  /// k nearest points to `query` (k capped at size()).
  std::vector<int> nearest(const Point& query, int k) const {
    k = std::min<int>(k, static_cast<int>(points_.size()));
    // max-heap of (distance2, index)
    std::vector<std::pair<double, int>> heap;
    heap.reserve(k + 1);
    search(root_, query, k, heap);
    std::sort(heap.begin(), heap.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<int> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back(idx);
    return out;
  }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(int lo, int hi) {
    if (lo >= hi) return -1;
    // split along the axis of largest spread
    Point mn = points_[order_[lo]], mx = points_[order_[lo]];
    for (int i = lo + 1; i < hi; ++i) {
      mn = mn.cwiseMin(points_[order_[i]]);
      mx = mx.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const int mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       return points_[a][axis] < points_[b][axis] ||
                              (points_[a][axis] == points_[b][axis] && a < b);
                     });
    Node node;
    node.point = order_[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int l = build(lo, mid);
    const int r = build(mid + 1, hi);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void search(int node_idx, const Point& query, int k,
              std::vector<std::pair<double, int>>& heap) const {
    if (node_idx < 0) return;
    const Node& node = nodes_[node_idx];
    const Point& p = points_[node.point];
    const double d2 = (p - query).squaredNorm();
    auto worse = [](const std::pair<double, int>& a, const std::pair<double, int>& b) {
      return a.first < b.first || (a.first == b.first && a.second < b.second);
    };
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace_back(d2, node.point);
      std::push_heap(heap.begin(), heap.end(), worse);
    } else if (worse({d2, node.point}, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), worse);
      heap.back() = {d2, node.point};
      std::push_heap(heap.begin(), heap.end(), worse);
    }
    const double delta = query[node.axis] - p[node.axis];
    const int near = delta <= 0 ? node.left : node.right;
    const int far = delta <= 0 ? node.right : node.left;
    search(near, query, k, heap);
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().first)
      search(far, query, k, heap);
  }

  std::vector<Point> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace spa
