#include <cmath>

#include "graphfit/data/dataset.hpp"

namespace graphfit::data {

SynthKind parse_synth_kind(const std::string& name) {
  if (name == "plane") return SynthKind::Plane;
  if (name == "sphere") return SynthKind::Sphere;
  if (name == "quadric") return SynthKind::Quadric;
  if (name == "cube") return SynthKind::Cube;
  throw ConfigError("unknown synthetic shape kind: " + name);
}

ShapeRecord synth_shape(SynthKind kind, int count, const SynthParams& params,
                        std::uint64_t seed) {
  if (count < 1) throw ConfigError("synth_shape: count must be >= 1");
  Rng rng(derive_seed(seed, 0x73796e7468ULL));
  std::vector<geom::Vec3> points, normals;
  points.reserve(static_cast<std::size_t>(count));
  normals.reserve(static_cast<std::size_t>(count));

  ShapeRecord record;
  switch (kind) {
    case SynthKind::Plane: {
      if (params.extent <= 0.0) throw ConfigError("synth_shape: extent must be > 0");
      record.name = "plane";
      for (int i = 0; i < count; ++i) {
        points.emplace_back(rng.uniform(-params.extent, params.extent),
                            rng.uniform(-params.extent, params.extent), 0.0);
        normals.emplace_back(0.0, 0.0, 1.0);
      }
      break;
    }
    case SynthKind::Sphere: {
      if (params.radius <= 0.0) throw ConfigError("synth_shape: radius must be > 0");
      record.name = "sphere";
      for (int i = 0; i < count; ++i) {
        geom::Vec3 dir(rng.normal(), rng.normal(), rng.normal());
        while (dir.norm() < 1e-12) dir = geom::Vec3(rng.normal(), rng.normal(), rng.normal());
        dir.normalize();
        points.push_back(params.radius * dir);
        normals.push_back(dir);
      }
      break;
    }
    case SynthKind::Quadric: {
      if (params.extent <= 0.0) throw ConfigError("synth_shape: extent must be > 0");
      record.name = "quadric";
      for (int i = 0; i < count; ++i) {
        const double x = rng.uniform(-params.extent, params.extent);
        const double y = rng.uniform(-params.extent, params.extent);
        points.emplace_back(x, y, params.a * x * x + params.b * y * y);
        normals.push_back(
            geom::Vec3(-2.0 * params.a * x, -2.0 * params.b * y, 1.0).normalized());
      }
      break;
    }
    case SynthKind::Cube: {
      if (params.side <= 0.0) throw ConfigError("synth_shape: side must be > 0");
      record.name = "cube";
      const double h = params.side / 2.0;
      for (int i = 0; i < count; ++i) {
        const int face = static_cast<int>(rng.uniform_index(6));
        const int axis = face / 2;
        const double sign = face % 2 == 0 ? 1.0 : -1.0;
        geom::Vec3 p(rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h));
        geom::Vec3 n = geom::Vec3::Zero();
        p[axis] = sign * h;
        n[axis] = sign;
        points.push_back(p);
        normals.push_back(n);
      }
      break;
    }
  }
  record.cloud = geom::PointCloud(std::move(points), std::move(normals));
  record.tags = {"synthetic"};
  return record;
}

}  // namespace graphfit::data
