#include "graphfit/geom/jet.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace graphfit::geom {

namespace {

void check_finite(const std::vector<Eigen::Vector2d>& xy) {
  for (const auto& p : xy)
    if (!p.allFinite()) throw Error("vandermonde: non-finite input");
}

}  // namespace

MatX build_vandermonde(const std::vector<Eigen::Vector2d>& xy, JetOrder order) {
  check_finite(xy);
  const int rows = static_cast<int>(xy.size());
  const int cols = order.term_count();
  MatX m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double x = xy[static_cast<std::size_t>(i)].x();
    const double y = xy[static_cast<std::size_t>(i)].y();
    int col = 0;
    for (int degree = 0; degree <= order.n; ++degree) {
      // x power descending within the degree: x^d, x^{d-1} y, ..., y^d.
      for (int yp = 0; yp <= degree; ++yp) {
        const int xp = degree - yp;
        m(i, col++) = std::pow(x, xp) * std::pow(y, yp);
      }
    }
  }
  return m;
}

std::pair<MatX, MatX> vandermonde_partials(
    const std::vector<Eigen::Vector2d>& xy, JetOrder order) {
  check_finite(xy);
  const int rows = static_cast<int>(xy.size());
  const int cols = order.term_count();
  MatX mx = MatX::Zero(rows, cols);
  MatX my = MatX::Zero(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const double x = xy[static_cast<std::size_t>(i)].x();
    const double y = xy[static_cast<std::size_t>(i)].y();
    int col = 0;
    for (int degree = 0; degree <= order.n; ++degree) {
      for (int yp = 0; yp <= degree; ++yp) {
        const int xp = degree - yp;
        if (xp > 0) mx(i, col) = xp * std::pow(x, xp - 1) * std::pow(y, yp);
        if (yp > 0) my(i, col) = yp * std::pow(x, xp) * std::pow(y, yp - 1);
        ++col;
      }
    }
  }
  return {mx, my};
}

JetCoefficients solve_weighted_jet(const Patch& patch, JetOrder order,
                                   const WeightVector& weights,
                                   const OffsetVector& offsets) {
  const int n_points = static_cast<int>(patch.size());
  const int n_terms = order.term_count();
  if (n_points < n_terms)
    throw SizeError("solve_weighted_jet: " + std::to_string(n_points) +
                    " points cannot determine " + std::to_string(n_terms) +
                    " coefficients");
  if (weights.weights.size() != n_points ||
      offsets.offsets.rows() != n_points)
    throw ShapeError("solve_weighted_jet: weights/offsets length mismatch");
  if (weights.weights.minCoeff() <= 0.0)
    throw Error("solve_weighted_jet: weights must be strictly positive");

  std::vector<Eigen::Vector2d> xy(static_cast<std::size_t>(n_points));
  VecX z(n_points);
  for (int i = 0; i < n_points; ++i) {
    const Vec3 p = patch.local_points[static_cast<std::size_t>(i)] +
                   offsets.offsets.row(i).transpose();
    xy[static_cast<std::size_t>(i)] = {p.x(), p.y()};
    z[i] = p.z();
  }

  const MatX m = build_vandermonde(xy, order);
  const MatX wm = weights.weights.asDiagonal() * m;
  const MatX a = m.transpose() * wm;
  const VecX rhs = wm.transpose() * z;

  JetCoefficients result;
  Eigen::LLT<MatX> llt(a);
  if (llt.info() == Eigen::Success) {
    result.beta = llt.solve(rhs);
    if (result.beta.allFinite()) return result;
  }

  const double ridge = 1e-9 * a.trace() / n_terms;
  Eigen::LLT<MatX> ridged(a + ridge * MatX::Identity(n_terms, n_terms));
  if (ridged.info() != Eigen::Success)
    throw ConditioningError("solve_weighted_jet: system singular after ridge");
  result.beta = ridged.solve(rhs);
  if (!result.beta.allFinite())
    throw ConditioningError("solve_weighted_jet: non-finite solution");
  result.regularized = true;
  return result;
}

UnitNormal jet_normal(const JetCoefficients& beta, const LocalFrame& frame) {
  const Vec3 local(-beta.beta1(), -beta.beta2(), 1.0);
  return UnitNormal{frame.direction_to_world(local.normalized()).normalized()};
}

std::vector<UnitNormal> neighbor_normals(const JetCoefficients& beta,
                                         const Patch& patch, JetOrder order) {
  std::vector<Eigen::Vector2d> xy(patch.size());
  for (std::size_t i = 0; i < patch.size(); ++i)
    xy[i] = {patch.local_points[i].x(), patch.local_points[i].y()};
  const auto [mx, my] = vandermonde_partials(xy, order);
  std::vector<UnitNormal> normals(patch.size());
  for (int i = 0; i < static_cast<int>(patch.size()); ++i) {
    const Vec3 local(-mx.row(i).dot(beta.beta), -my.row(i).dot(beta.beta), 1.0);
    normals[static_cast<std::size_t>(i)] = UnitNormal{
        patch.frame.direction_to_world(local.normalized()).normalized()};
  }
  return normals;
}

UnitNormal classical_jet_normal(const Patch& patch, JetOrder order) {
  const int n = static_cast<int>(patch.size());
  const JetCoefficients beta = solve_weighted_jet(
      patch, order, WeightVector::ones(n), OffsetVector::zeros(n));
  return jet_normal(beta, patch.frame);
}

}  // namespace graphfit::geom
