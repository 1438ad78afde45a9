// Shape records, file ingestion, augmentation, synthetic shapes, and
// per-epoch patch sampling.

#ifndef GRAPHFIT_DATA_DATASET_HPP
#define GRAPHFIT_DATA_DATASET_HPP

#include <string>
#include <vector>

#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::data {

struct ShapeRecord {
  std::string name;
  geom::PointCloud cloud;
  std::vector<std::string> tags;  // split / augmentation provenance
};

// --- PCPNet-style file formats ------------------------------------------
// .xyz / .normals: whitespace-separated triples of decimals, one per line.
// .pidx: one integer index per line. Writers emit 17 significant digits so
// a write/read round trip is value-exact.

std::vector<geom::Vec3> read_xyz(const std::string& path);
std::vector<geom::Vec3> read_normals(const std::string& path);
std::vector<int> read_pidx(const std::string& path, std::size_t cloud_size);

void write_xyz(const std::string& path, const std::vector<geom::Vec3>& points);
void write_normals(const std::string& path, const std::vector<geom::Vec3>& normals);
void write_pidx(const std::string& path, const std::vector<int>& indices);

/// Shape-list file: one shape name per line, referencing sibling files
/// <dir>/<name>.xyz (+ optional .normals / .pidx).
std::vector<std::string> read_shape_list(const std::string& path);

/// Loads <dir>/<name>.xyz and, when present, .normals.
ShapeRecord load_shape(const std::string& dir, const std::string& name);

// --- augmentation ---------------------------------------------------------

/// Gaussian displacement with per-coordinate std sigma_rel * bbox_diagonal.
/// Ground-truth normals are untouched.
geom::PointCloud add_gaussian_noise(const geom::PointCloud& cloud,
                                    double sigma_rel, std::uint64_t seed);

/// The three reference noise tiers (fractions of the bbox diagonal).
inline constexpr double kNoiseTiers[3] = {0.00125, 0.006, 0.012};

/// Keep probability ramps linearly 1.0 -> 0.1 along the longest bbox axis.
geom::PointCloud density_gradient(const geom::PointCloud& cloud, std::uint64_t seed);

/// The longest axis is split into 8 equal bands; alternate bands keep only
/// 15% of their points.
geom::PointCloud density_striped(const geom::PointCloud& cloud, std::uint64_t seed);

// --- synthetic shapes -------------------------------------------------------

enum class SynthKind { Plane, Sphere, Quadric, Cube };

struct SynthParams {
  double extent = 1.0;  // plane/quadric half-extent
  double radius = 1.0;  // sphere
  double side = 2.0;    // cube edge length
  double a = 0.1;       // quadric z = a x^2 + b y^2
  double b = 0.2;
};

/// Uniform surface samples with exact analytic unit normals.
ShapeRecord synth_shape(SynthKind kind, int count, const SynthParams& params,
                        std::uint64_t seed);

SynthKind parse_synth_kind(const std::string& name);

// --- patch sampling ----------------------------------------------------------

struct TrainingSample {
  int shape_index = 0;
  int query_index = 0;
};

/// A fresh uniform sample of `per_shape` query indices per shape. When a
/// pool is given for a shape, queries come from it; sampling falls back to
/// replacement whenever the pool (or shape) is smaller than per_shape.
std::vector<TrainingSample> sample_training_patches(
    const std::vector<ShapeRecord>& shapes, int per_shape, std::uint64_t seed,
    const std::vector<std::vector<int>>& query_pools = {});

}  // namespace graphfit::data

#endif  // GRAPHFIT_DATA_DATASET_HPP
