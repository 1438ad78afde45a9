// Normal-guided point-position denoising. Each iteration moves a point by
// the sum of its neighbors' displacement vectors projected onto the two
// normal directions:
//   p_i' = p_i + gamma * sum_j (n_i n_i^T + n_j n_j^T) (p_j - p_i)
// Neighborhoods are recomputed every iteration; normals stay fixed.

#ifndef GRAPHFIT_EVAL_DENOISE_HPP
#define GRAPHFIT_EVAL_DENOISE_HPP

#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::eval {

struct DenoiseConfig {
  double gamma = 0.05;
  int iterations = 10;
  int k = 8;

  void validate() const {
    if (gamma <= 0.0) throw ConfigError("denoise: gamma must be > 0");
    if (iterations < 1) throw ConfigError("denoise: iterations must be >= 1");
    if (k < 1) throw ConfigError("denoise: k must be >= 1");
  }
};

geom::PointCloud denoise(const geom::PointCloud& cloud, const DenoiseConfig& config);

}  // namespace graphfit::eval

#endif  // GRAPHFIT_EVAL_DENOISE_HPP
