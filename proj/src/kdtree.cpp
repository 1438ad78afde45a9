#include "graphfit/geom/kdtree.hpp"

#include <algorithm>

namespace graphfit::geom {

KdTree::KdTree(const std::vector<Vec3>& points) : points_(&points) {
  order_.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) order_[i] = static_cast<int>(i);
  if (!points.empty()) root_ = build(0, static_cast<int>(points.size()), 0);
}

int KdTree::build(int begin, int end, int depth) {
  Node node;
  if (end - begin <= kLeafSize) {
    node.begin = begin;
    node.end = end;
    nodes_.push_back(node);
    return static_cast<int>(nodes_.size()) - 1;
  }
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  const std::vector<Vec3>& pts = *points_;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](int a, int b) {
                     if (pts[a][axis] != pts[b][axis])
                       return pts[a][axis] < pts[b][axis];
                     return a < b;
                   });
  node.axis = axis;
  node.split = pts[order_[mid]][axis];
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  const int left = build(begin, mid, depth + 1);
  const int right = build(mid, end, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree::search(int node_id, const Vec3& query, int k,
                    std::vector<Candidate>& heap) const {
  const Node& node = nodes_[node_id];
  const std::vector<Vec3>& pts = *points_;
  if (node.axis < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const Candidate c{(pts[idx] - query).squaredNorm(), idx};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const double delta = query[node.axis] - node.split;
  const int near = delta <= 0.0 ? node.left : node.right;
  const int far = delta <= 0.0 ? node.right : node.left;
  search(near, query, k, heap);
  // The far side can still hold a candidate that beats the current worst
  // on the tie-break, so use <= rather than <.
  if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().dist2)
    search(far, query, k, heap);
}

std::vector<int> KdTree::knn(const Vec3& query, int k) const {
  if (k < 1 || static_cast<std::size_t>(k) > points_->size())
    throw SizeError("knn: k=" + std::to_string(k) + " out of range for cloud of " +
                    std::to_string(points_->size()) + " points");
  std::vector<Candidate> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  search(root_, query, k, heap);
  std::sort(heap.begin(), heap.end());
  std::vector<int> result(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) result[i] = heap[i].index;
  return result;
}

std::vector<int> knn_brute_force(const std::vector<Vec3>& points,
                                 const Vec3& query, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > points.size())
    throw SizeError("knn_brute_force: k out of range");
  std::vector<std::pair<double, int>> dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i)
    dist[i] = {(points[i] - query).squaredNorm(), static_cast<int>(i)};
  std::sort(dist.begin(), dist.end());
  std::vector<int> result(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) result[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
  return result;
}

}  // namespace graphfit::geom
