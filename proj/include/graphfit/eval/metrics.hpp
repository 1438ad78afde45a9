// Unoriented angular error metrics.

#ifndef GRAPHFIT_EVAL_METRICS_HPP
#define GRAPHFIT_EVAL_METRICS_HPP

#include <vector>

#include "graphfit/geom/point_cloud.hpp"

namespace graphfit::eval {

/// Unoriented angle in radians: arccos(clamp(|<a,b>|, 0, 1)).
double angle_between(const geom::Vec3& n_hat, const geom::Vec3& n_gt);

/// sqrt(mean squared angle), reported in degrees.
double rmse_angles(const std::vector<geom::Vec3>& pred,
                   const std::vector<geom::Vec3>& gt);

/// Fraction of pairs with angle strictly below alpha (degrees).
double pgp(const std::vector<geom::Vec3>& pred, const std::vector<geom::Vec3>& gt,
           double alpha_deg);

}  // namespace graphfit::eval

#endif  // GRAPHFIT_EVAL_METRICS_HPP
