#include "graphfit/eval/denoise.hpp"

#include "graphfit/geom/kdtree.hpp"

namespace graphfit::eval {

geom::PointCloud denoise(const geom::PointCloud& cloud, const DenoiseConfig& config) {
  config.validate();
  if (!cloud.has_normals())
    throw ConfigError("denoise: cloud must carry normals");
  const int n = static_cast<int>(cloud.size());
  if (config.k + 1 > n)
    throw SizeError("denoise: neighborhood larger than the cloud");

  geom::PointCloud out = cloud;
  for (int it = 0; it < config.iterations; ++it) {
    const geom::KdTree tree(out.points);
    std::vector<geom::Vec3> next(out.points.size());
    for (int i = 0; i < n; ++i) {
      const geom::Vec3& p = out.points[static_cast<std::size_t>(i)];
      const geom::Vec3& ni = out.normals[static_cast<std::size_t>(i)];
      geom::Vec3 update = geom::Vec3::Zero();
      // k+1 because the query returns itself at distance zero.
      for (int j : tree.knn(p, config.k + 1)) {
        if (j == i) continue;
        const geom::Vec3 d = out.points[static_cast<std::size_t>(j)] - p;
        const geom::Vec3& nj = out.normals[static_cast<std::size_t>(j)];
        update += ni * ni.dot(d) + nj * nj.dot(d);
      }
      next[static_cast<std::size_t>(i)] = p + config.gamma * update;
    }
    out.points = std::move(next);
  }
  out.update_bbox();
  return out;
}

}  // namespace graphfit::eval
