#include "graphfit/eval/metrics.hpp"

#include <cmath>

namespace graphfit::eval {

double angle_between(const geom::Vec3& n_hat, const geom::Vec3& n_gt) {
  const double d = std::abs(n_hat.dot(n_gt));
  return std::acos(std::clamp(d, 0.0, 1.0));
}

double rmse_angles(const std::vector<geom::Vec3>& pred,
                   const std::vector<geom::Vec3>& gt) {
  if (pred.empty() || pred.size() != gt.size())
    throw SizeError("rmse_angles: need equal non-empty prediction/target lists");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double a = angle_between(pred[i], gt[i]);
    acc += a * a;
  }
  return std::sqrt(acc / static_cast<double>(pred.size())) * 180.0 / M_PI;
}

double pgp(const std::vector<geom::Vec3>& pred, const std::vector<geom::Vec3>& gt,
           double alpha_deg) {
  if (pred.empty() || pred.size() != gt.size())
    throw SizeError("pgp: need equal non-empty prediction/target lists");
  if (alpha_deg <= 0.0 || alpha_deg > 180.0)
    throw ConfigError("pgp: alpha must lie in (0, 180] degrees");
  const double alpha_rad = alpha_deg * M_PI / 180.0;
  std::size_t good = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (angle_between(pred[i], gt[i]) < alpha_rad) ++good;
  return static_cast<double>(good) / static_cast<double>(pred.size());
}

}  // namespace graphfit::eval
