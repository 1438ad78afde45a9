// Local patches: neighborhood extraction and canonicalization.
//
// A patch is the unit of all fitting and learning: a query point plus its
// k nearest neighbors, expressed in a canonical local frame. The frame
// centers the query at the origin, scales the neighborhood to unit radius,
// and rotates it so the PCA axis of smallest variance becomes the local z
// axis (the height-function direction of the jet fit).

#ifndef GRAPHFIT_GEOM_PATCH_HPP
#define GRAPHFIT_GEOM_PATCH_HPP

#include <vector>

#include "graphfit/geom/kdtree.hpp"
#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::geom {

/// Rigid+scale map from world to canonical coordinates:
///   local = rotation * (world - translation) / scale
/// rotation is orthonormal with determinant +1; its transpose maps
/// canonical directions back to world.
struct LocalFrame {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Vec3 to_local(const Vec3& world) const {
    return rotation * (world - translation) / scale;
  }
  Vec3 to_world(const Vec3& local) const {
    return rotation.transpose() * (local * scale) + translation;
  }
  /// Directions ignore translation and (uniform) scale.
  Vec3 direction_to_world(const Vec3& local_dir) const {
    return rotation.transpose() * local_dir;
  }
};

struct Patch {
  int query_index = -1;
  std::vector<Vec3> local_points;  // canonicalized; query first when built
                                   // by extract_patch
  LocalFrame frame;
  std::vector<int> source_indices;

  std::size_t size() const { return local_points.size(); }
};

struct UnitNormal {
  Vec3 direction = Vec3::UnitZ();
};

/// k nearest neighbors of cloud.points[query] (the query itself included
/// at distance zero), canonicalized. Distance ties break by ascending
/// point index.
///
/// Throws SizeError if k exceeds the cloud size and DegeneracyError if the
/// neighborhood has zero radius (all points coincident).
Patch extract_patch(const PointCloud& cloud, int query, int k);

/// Same, reusing a prebuilt tree over cloud.points.
Patch extract_patch(const PointCloud& cloud, const KdTree& tree, int query,
                    int k);

/// Eigenvector of the patch covariance with smallest eigenvalue, mapped to
/// the world frame. The sign makes the canonical-frame normal's z positive.
/// Throws DegeneracyError when the covariance is rank-deficient (collinear
/// points).
UnitNormal pca_normal(const Patch& patch);

}  // namespace graphfit::geom

#endif  // GRAPHFIT_GEOM_PATCH_HPP
