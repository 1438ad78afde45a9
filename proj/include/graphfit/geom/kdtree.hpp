// Exact k-nearest-neighbor search over 3D points.
//
// Median-split kd-tree with a bounded max-heap for the running candidate
// set. Candidates are ordered by (squared distance, point index), so ties
// in distance always resolve to the smaller index and results are fully
// deterministic.

#ifndef GRAPHFIT_GEOM_KDTREE_HPP
#define GRAPHFIT_GEOM_KDTREE_HPP

#include <vector>

#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::geom {

class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points);

  /// Indices of the k nearest points to `query` (the query's own index is
  /// not treated specially; a point at distance zero is a valid neighbor).
  /// Result is sorted by (distance, index) ascending.
  std::vector<int> knn(const Vec3& query, int k) const;

  std::size_t size() const { return points_->size(); }

 private:
  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;   // coordinate of the splitting point on `axis`
    int left = -1, right = -1;
    int begin = 0, end = 0;  // index range into order_ (leaves only)
  };

  struct Candidate {
    double dist2;
    int index;
    // Max-heap ordering: the "largest" candidate is the worst one.
    bool operator<(const Candidate& o) const {
      if (dist2 != o.dist2) return dist2 < o.dist2;
      return index < o.index;
    }
  };

  int build(int begin, int end, int depth);
  void search(int node, const Vec3& query, int k,
              std::vector<Candidate>& heap) const;

  const std::vector<Vec3>* points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;

  static constexpr int kLeafSize = 16;
};

/// Brute-force reference with the same (distance, index) ordering.
std::vector<int> knn_brute_force(const std::vector<Vec3>& points,
                                 const Vec3& query, int k);

}  // namespace graphfit::geom

#endif  // GRAPHFIT_GEOM_KDTREE_HPP
