// Closed-form weighted n-jet surface fitting.
//
// The local surface model is an order-n bivariate height polynomial
// z = sum_{k<=n} sum_{j<=k} beta_{k-j,j} x^{k-j} y^j fitted to the patch
// in its canonical frame. Monomials are ordered graded-lexicographically
// with the x power descending within each degree:
//   1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3, ...

#ifndef GRAPHFIT_GEOM_JET_HPP
#define GRAPHFIT_GEOM_JET_HPP

#include <Eigen/Core>
#include <vector>

#include "graphfit/geom/patch.hpp"

namespace graphfit::geom {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

struct JetOrder {
  int n = 2;

  explicit JetOrder(int order) : n(order) {
    if (order < 1) throw ConfigError("JetOrder: order must be >= 1");
  }
  /// Number of monomials through total degree n.
  int term_count() const { return (n + 1) * (n + 2) / 2; }
};

/// Fitted polynomial coefficients, in canonical-frame units, ordered as
/// the Vandermonde columns. `regularized` records whether the ridge
/// fallback was needed to factor the normal equations.
struct JetCoefficients {
  VecX beta;
  bool regularized = false;

  double beta1() const { return beta[1]; }  // coefficient of x
  double beta2() const { return beta[2]; }  // coefficient of y
};

/// Per-point fitting weights, strictly positive (floor 1e-4) and <= 1.
struct WeightVector {
  VecX weights;

  static constexpr double kFloor = 1e-4;

  static WeightVector ones(int n) { return WeightVector{VecX::Ones(n)}; }
};

/// Per-point position adjustments in canonical-frame units, each component
/// clamped to [-0.25, 0.25].
struct OffsetVector {
  MatX offsets;  // N x 3

  static constexpr double kClamp = 0.25;

  static OffsetVector zeros(int n) { return OffsetVector{MatX::Zero(n, 3)}; }
};

/// Row i holds the monomials of (xy[i].x, xy[i].y) through degree order.n.
MatX build_vandermonde(const std::vector<Eigen::Vector2d>& xy, JetOrder order);

/// Entrywise analytic partials of the monomial rows. Returns {dM/dx, dM/dy}.
std::pair<MatX, MatX> vandermonde_partials(
    const std::vector<Eigen::Vector2d>& xy, JetOrder order);

/// Closed-form weighted least-squares fit: shifts the patch points by
/// `offsets`, forms the Vandermonde system from the shifted (x, y) and
/// heights z, and solves beta = (M^T W M)^-1 M^T W z by Cholesky.
/// If the factorization fails, retries once with ridge
/// lambda = 1e-9 * trace(M^T W M) / N_n and flags the result.
/// Throws ConditioningError when the ridge does not help and SizeError
/// when the patch has fewer points than coefficients.
JetCoefficients solve_weighted_jet(const Patch& patch, JetOrder order,
                                   const WeightVector& weights,
                                   const OffsetVector& offsets);

/// Normal of the fitted surface at the patch origin:
/// normalize(-beta1, -beta2, 1) mapped back to the world frame.
UnitNormal jet_normal(const JetCoefficients& beta, const LocalFrame& frame);

/// Normals of the fitted surface at every patch point, via the gradient of
/// the implicit form F(x,y,z) = J(x,y) - z, world frame.
std::vector<UnitNormal> neighbor_normals(const JetCoefficients& beta,
                                         const Patch& patch, JetOrder order);

/// Unweighted, zero-offset fit followed by jet_normal.
UnitNormal classical_jet_normal(const Patch& patch, JetOrder order);

}  // namespace graphfit::geom

#endif  // GRAPHFIT_GEOM_JET_HPP
