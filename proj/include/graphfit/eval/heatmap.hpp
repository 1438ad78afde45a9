#ifndef GRAPHFIT_EVAL_HEATMAP_HPP
#define GRAPHFIT_EVAL_HEATMAP_HPP

#include <array>
#include <string>
#include <vector>

#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::eval {

/// Two-segment linear color ramp over the angular error: blue (0,0,255) at
/// 0 degrees, green (0,255,0) at 30, red (255,0,0) at >= 60, clamped.
std::array<int, 3> error_color(double angle_deg);

/// Writes "x y z r g b" per point, colored by the unoriented angle between
/// prediction and ground truth.
void export_error_heatmap(const geom::PointCloud& cloud,
                          const std::vector<geom::Vec3>& pred,
                          const std::vector<geom::Vec3>& gt,
                          const std::string& path);

}  // namespace graphfit::eval

#endif  // GRAPHFIT_EVAL_HEATMAP_HPP
