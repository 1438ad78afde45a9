#include "graphfit/data/dataset.hpp"

namespace graphfit::data {

geom::PointCloud add_gaussian_noise(const geom::PointCloud& cloud,
                                    double sigma_rel, std::uint64_t seed) {
  if (sigma_rel < 0.0) throw ConfigError("add_gaussian_noise: sigma must be >= 0");
  geom::PointCloud out = cloud;
  if (sigma_rel == 0.0) return out;
  const double sigma = sigma_rel * cloud.bbox_diagonal;
  Rng rng(derive_seed(seed, 0x6e6f697365ULL));
  for (geom::Vec3& p : out.points)
    p += geom::Vec3(rng.normal(0.0, sigma), rng.normal(0.0, sigma),
                    rng.normal(0.0, sigma));
  out.update_bbox();
  return out;
}

namespace {

int longest_axis(const geom::PointCloud& cloud, geom::Vec3& lo, geom::Vec3& hi) {
  lo = hi = cloud.points.front();
  for (const geom::Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const geom::Vec3 extent = hi - lo;
  int axis = 0;
  extent.maxCoeff(&axis);
  return axis;
}

geom::PointCloud filter_cloud(const geom::PointCloud& cloud,
                              const std::vector<bool>& keep) {
  geom::PointCloud out;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!keep[i]) continue;
    out.points.push_back(cloud.points[i]);
    if (cloud.has_normals()) out.normals.push_back(cloud.normals[i]);
  }
  out.update_bbox();
  return out;
}

}  // namespace

geom::PointCloud density_gradient(const geom::PointCloud& cloud, std::uint64_t seed) {
  if (cloud.points.empty()) throw SizeError("density_gradient: empty cloud");
  geom::Vec3 lo, hi;
  const int axis = longest_axis(cloud, lo, hi);
  const double span = std::max(hi[axis] - lo[axis], 1e-300);
  Rng rng(derive_seed(seed, 0x67726164ULL));
  std::vector<bool> keep(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double t = (cloud.points[i][axis] - lo[axis]) / span;
    keep[i] = rng.uniform() < 1.0 - 0.9 * t;  // 1.0 at the near end, 0.1 at the far
  }
  return filter_cloud(cloud, keep);
}

geom::PointCloud density_striped(const geom::PointCloud& cloud, std::uint64_t seed) {
  if (cloud.points.empty()) throw SizeError("density_striped: empty cloud");
  geom::Vec3 lo, hi;
  const int axis = longest_axis(cloud, lo, hi);
  const double span = std::max(hi[axis] - lo[axis], 1e-300);
  Rng rng(derive_seed(seed, 0x7374726970ULL));
  std::vector<bool> keep(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const double t = (cloud.points[i][axis] - lo[axis]) / span;
    int band = static_cast<int>(t * 8.0);
    if (band == 8) band = 7;  // the far boundary belongs to the last band
    keep[i] = band % 2 == 0 || rng.uniform() < 0.15;
  }
  return filter_cloud(cloud, keep);
}

std::vector<TrainingSample> sample_training_patches(
    const std::vector<ShapeRecord>& shapes, int per_shape, std::uint64_t seed,
    const std::vector<std::vector<int>>& query_pools) {
  if (per_shape < 1) throw ConfigError("sample_training_patches: per_shape must be >= 1");
  std::vector<TrainingSample> samples;
  samples.reserve(shapes.size() * static_cast<std::size_t>(per_shape));
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    Rng rng(derive_seed(seed, 0x73616d706cULL, s));
    const std::vector<int>* pool =
        s < query_pools.size() && !query_pools[s].empty() ? &query_pools[s] : nullptr;
    const std::size_t universe = pool ? pool->size() : shapes[s].cloud.size();
    if (universe == 0) throw ConfigError("sample_training_patches: empty shape");
    if (static_cast<std::size_t>(per_shape) <= universe) {
      // Uniform sample without replacement: partial Fisher-Yates over the
      // index universe.
      std::vector<int> order(universe);
      for (std::size_t i = 0; i < universe; ++i)
        order[i] = pool ? (*pool)[i] : static_cast<int>(i);
      for (int i = 0; i < per_shape; ++i) {
        const std::size_t j = i + rng.uniform_index(universe - static_cast<std::size_t>(i));
        std::swap(order[static_cast<std::size_t>(i)], order[j]);
        samples.push_back({static_cast<int>(s), order[static_cast<std::size_t>(i)]});
      }
    } else {
      // Documented fallback: with replacement.
      for (int i = 0; i < per_shape; ++i) {
        const std::size_t j = rng.uniform_index(universe);
        samples.push_back({static_cast<int>(s), pool ? (*pool)[j] : static_cast<int>(j)});
      }
    }
  }
  return samples;
}

}  // namespace graphfit::data
