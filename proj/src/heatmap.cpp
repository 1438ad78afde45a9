#include "graphfit/eval/heatmap.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "graphfit/eval/metrics.hpp"

namespace graphfit::eval {

std::array<int, 3> error_color(double angle_deg) {
  const double a = std::clamp(angle_deg, 0.0, 60.0);
  double r = 0.0, g = 0.0, b = 0.0;
  if (a <= 30.0) {  // blue -> green
    const double t = a / 30.0;
    g = t;
    b = 1.0 - t;
  } else {  // green -> red
    const double t = (a - 30.0) / 30.0;
    r = t;
    g = 1.0 - t;
  }
  return {static_cast<int>(std::lround(r * 255.0)),
          static_cast<int>(std::lround(g * 255.0)),
          static_cast<int>(std::lround(b * 255.0))};
}

void export_error_heatmap(const geom::PointCloud& cloud,
                          const std::vector<geom::Vec3>& pred,
                          const std::vector<geom::Vec3>& gt,
                          const std::string& path) {
  if (pred.size() != cloud.size() || gt.size() != cloud.size())
    throw SizeError("export_error_heatmap: prediction/target counts must match the cloud");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double deg = angle_between(pred[i], gt[i]) * 180.0 / M_PI;
    const auto [r, g, b] = error_color(deg);
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %d %d %d\n",
                  cloud.points[i].x(), cloud.points[i].y(), cloud.points[i].z(),
                  r, g, b);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace graphfit::eval
