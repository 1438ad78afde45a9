#ifndef GRAPHFIT_GEOM_POINT_CLOUD_HPP
#define GRAPHFIT_GEOM_POINT_CLOUD_HPP

#include <Eigen/Core>
#include <vector>

#include "graphfit/common.hpp"

namespace graphfit::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// A point set in model units, with optional per-point unit normals.
/// bbox_diagonal is the diagonal of the axis-aligned bounding box and is
/// the reference length for relative noise levels.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty or same length as points
  double bbox_diagonal = 0.0;

  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> pts) : points(std::move(pts)) {
    update_bbox();
  }
  PointCloud(std::vector<Vec3> pts, std::vector<Vec3> nrm)
      : points(std::move(pts)), normals(std::move(nrm)) {
    update_bbox();
  }

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return !normals.empty(); }

  void update_bbox() {
    if (points.empty()) {
      bbox_diagonal = 0.0;
      return;
    }
    Vec3 lo = points.front(), hi = points.front();
    for (const Vec3& p : points) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    bbox_diagonal = (hi - lo).norm();
  }
};

}  // namespace graphfit::geom

#endif  // GRAPHFIT_GEOM_POINT_CLOUD_HPP
