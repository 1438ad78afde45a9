#include "graphfit/geom/patch.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace graphfit::geom {

namespace {

Mat3 covariance(const std::vector<Vec3>& pts) {
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : pts) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(pts.size());
}

// Deterministic sign fix: orient v so its largest-magnitude component is
// positive.
Vec3 sign_fixed(const Vec3& v) {
  int arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  return v[arg] < 0.0 ? Vec3(-v) : v;
}

// Rotation whose rows are the PCA axes of `pts`, smallest-variance axis
// last (the local z). Right-handed by construction.
Mat3 pca_rotation(const std::vector<Vec3>& pts) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(covariance(pts));
  // Eigenvalues ascending: column 0 is the smallest-variance direction.
  const Vec3 z_axis = sign_fixed(solver.eigenvectors().col(0));
  const Vec3 x_axis = sign_fixed(solver.eigenvectors().col(2));
  const Vec3 y_axis = z_axis.cross(x_axis);
  Mat3 rot;
  rot.row(0) = x_axis;
  rot.row(1) = y_axis;
  rot.row(2) = z_axis;
  return rot;
}

}  // namespace

Patch extract_patch(const PointCloud& cloud, const KdTree& tree, int query,
                    int k) {
  if (k < 1 || static_cast<std::size_t>(k) > cloud.size())
    throw SizeError("extract_patch: k=" + std::to_string(k) +
                    " exceeds cloud size " + std::to_string(cloud.size()));
  if (query < 0 || static_cast<std::size_t>(query) >= cloud.size())
    throw BoundsError("extract_patch: query index " + std::to_string(query) +
                      " out of range");

  Patch patch;
  patch.query_index = query;
  patch.source_indices = tree.knn(cloud.points[static_cast<std::size_t>(query)], k);

  const Vec3 center = cloud.points[static_cast<std::size_t>(query)];
  std::vector<Vec3> raw(patch.source_indices.size());
  double radius = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = cloud.points[static_cast<std::size_t>(patch.source_indices[i])];
    radius = std::max(radius, (raw[i] - center).norm());
  }
  if (radius <= 0.0)
    throw DegeneracyError("extract_patch: all neighborhood points coincide");

  patch.frame.rotation = pca_rotation(raw);
  patch.frame.translation = center;
  patch.frame.scale = radius;
  patch.local_points.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    patch.local_points[i] = patch.frame.to_local(raw[i]);
  return patch;
}

Patch extract_patch(const PointCloud& cloud, int query, int k) {
  const KdTree tree(cloud.points);
  return extract_patch(cloud, tree, query, k);
}

UnitNormal pca_normal(const Patch& patch) {
  if (patch.size() < 3)
    throw SizeError("pca_normal: patch needs at least 3 points");
  const Mat3 cov = covariance(patch.local_points);
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 evals = solver.eigenvalues();
  // Collinear points: the two smallest variances both vanish.
  if (evals[1] <= 1e-12 * std::max(evals[2], 1e-300))
    throw DegeneracyError("pca_normal: rank-deficient covariance");
  Vec3 local = solver.eigenvectors().col(0);
  if (local.z() < 0.0) local = -local;
  return UnitNormal{patch.frame.direction_to_world(local).normalized()};
}

}  // namespace graphfit::geom
