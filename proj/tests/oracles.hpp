// Test-only reference implementations, kept independent of the library's
// solve paths: a gradient-descent minimizer of the weighted jet objective,
// an extended-precision normal-equation solver, and small random-input
// helpers.

#ifndef GRAPHFIT_TESTS_ORACLES_HPP
#define GRAPHFIT_TESTS_ORACLES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "graphfit/common.hpp"
#include "graphfit/geom/jet.hpp"

namespace oracles {

using graphfit::Rng;
using graphfit::geom::JetOrder;
using graphfit::geom::MatX;
using graphfit::geom::OffsetVector;
using graphfit::geom::Patch;
using graphfit::geom::Vec3;
using graphfit::geom::VecX;
using graphfit::geom::WeightVector;

// Monomial rows built independently of the library (explicit power loop).
inline MatX monomial_rows(const std::vector<Eigen::Vector2d>& xy, int order) {
  const int terms = (order + 1) * (order + 2) / 2;
  MatX m(static_cast<int>(xy.size()), terms);
  for (int i = 0; i < m.rows(); ++i) {
    int col = 0;
    for (int d = 0; d <= order; ++d)
      for (int yp = 0; yp <= d; ++yp) {
        double v = 1.0;
        for (int t = 0; t < d - yp; ++t) v *= xy[static_cast<std::size_t>(i)].x();
        for (int t = 0; t < yp; ++t) v *= xy[static_cast<std::size_t>(i)].y();
        m(i, col++) = v;
      }
  }
  return m;
}

// Minimizes sum_i w_i (m_i^T beta - z_i)^2 by accelerated gradient descent
// (Nesterov momentum with function-value restarts) on a column-equilibrated
// system. Uses only gradient evaluations; no factorization of the normal
// equations.
inline VecX gradient_descent_wls(const Patch& patch, JetOrder order,
                                 const WeightVector& weights,
                                 const OffsetVector& offsets,
                                 int max_iters = 200000) {
  const int n = static_cast<int>(patch.size());
  std::vector<Eigen::Vector2d> xy(static_cast<std::size_t>(n));
  VecX z(n);
  for (int i = 0; i < n; ++i) {
    const Vec3 p = patch.local_points[static_cast<std::size_t>(i)] +
                   offsets.offsets.row(i).transpose();
    xy[static_cast<std::size_t>(i)] = {p.x(), p.y()};
    z[i] = p.z();
  }
  const MatX m = monomial_rows(xy, order.n);
  const VecX w = weights.weights;
  const int terms = static_cast<int>(m.cols());

  // Column equilibration: beta = d .* gamma, fit gamma instead.
  VecX d(terms);
  for (int j = 0; j < terms; ++j) {
    const double norm2 = (w.array() * m.col(j).array().square()).sum();
    d[j] = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
  }
  const MatX ms = m * d.asDiagonal();

  auto grad = [&](const VecX& gamma) -> VecX {
    const VecX r = ms * gamma - z;
    return 2.0 * ms.transpose() * (w.array() * r.array()).matrix();
  };
  auto fval = [&](const VecX& gamma) -> double {
    const VecX r = ms * gamma - z;
    return (w.array() * r.array().square()).sum();
  };

  // Lipschitz constant of grad: 2 * lambda_max(ms^T W ms), by power iteration
  // on matvec products.
  VecX v = VecX::Ones(terms).normalized();
  double lam = 1.0;
  for (int it = 0; it < 50; ++it) {
    VecX av = 2.0 * ms.transpose() * (w.array() * (ms * v).array()).matrix();
    lam = av.norm();
    if (lam == 0.0) break;
    v = av / lam;
  }
  const double step = 1.0 / std::max(lam, 1e-30);

  VecX gamma = VecX::Zero(terms);
  VecX y = gamma;
  double t = 1.0;
  double f_prev = fval(gamma);
  for (int it = 0; it < max_iters; ++it) {
    const VecX g = grad(y);
    if (g.norm() <= 1e-14 * std::max(1.0, z.norm())) break;
    const VecX gamma_next = y - step * g;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = gamma_next + ((t - 1.0) / t_next) * (gamma_next - gamma);
    gamma = gamma_next;
    t = t_next;
    const double f = fval(gamma);
    if (f > f_prev) {  // restart momentum when progress stalls
      y = gamma;
      t = 1.0;
    }
    f_prev = f;
  }
  return d.asDiagonal() * gamma;
}

// Normal equations assembled and solved in long double.
inline VecX normal_equations_extended(const std::vector<Eigen::Vector2d>& xy,
                                      const VecX& z, const VecX& w, int order) {
  using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LVec = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const MatX md = monomial_rows(xy, order);
  LMat m = md.cast<long double>();
  LVec wl = w.cast<long double>();
  LMat a = m.transpose() * wl.asDiagonal() * m;
  LVec b = m.transpose() * (wl.array() * z.cast<long double>().array()).matrix();
  LVec beta = a.fullPivLu().solve(b);
  return beta.cast<double>();
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

// A synthetic patch in an identity frame: random (x, y) in the unit disk
// with heights from a random low-order polynomial plus noise. Generic and
// well-conditioned for jet fitting.
inline Patch random_identity_patch(Rng& rng, int n_points) {
  Patch patch;
  patch.query_index = 0;
  patch.local_points.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    double x = 0.0, y = 0.0;
    do {
      x = rng.uniform(-1.0, 1.0);
      y = rng.uniform(-1.0, 1.0);
    } while (x * x + y * y > 1.0);
    const double z = 0.3 * rng.normal() + 0.4 * x * x - 0.2 * x * y + 0.1 * y;
    patch.local_points.emplace_back(x, y, z);
  }
  return patch;
}

}  // namespace oracles

#endif  // GRAPHFIT_TESTS_ORACLES_HPP
