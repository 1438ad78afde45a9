#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "graphfit/geom/jet.hpp"
#include "graphfit/geom/kdtree.hpp"
#include "graphfit/geom/patch.hpp"
#include "oracles.hpp"

using namespace graphfit;
using namespace graphfit::geom;

namespace {

PointCloud plane_grid(int side, double z = 0.0) {
  std::vector<Vec3> pts;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      pts.emplace_back(-1.0 + 2.0 * i / (side - 1), -1.0 + 2.0 * j / (side - 1), z);
  return PointCloud(std::move(pts));
}

double angle_deg(const Vec3& a, const Vec3& b) {
  const double d = std::min(1.0, std::abs(a.normalized().dot(b.normalized())));
  return std::acos(d) * 180.0 / M_PI;
}

}  // namespace

TEST_CASE("kdtree matches brute force with tie-break by index") {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    const int n = 3 + static_cast<int>(rng.uniform_index(200));
    for (int i = 0; i < n; ++i) {
      // Snap to a coarse grid so exact distance ties actually occur.
      pts.emplace_back(std::round(rng.uniform(-2, 2) * 4) / 4,
                       std::round(rng.uniform(-2, 2) * 4) / 4,
                       std::round(rng.uniform(-2, 2) * 4) / 4);
    }
    const KdTree tree(pts);
    for (int q = 0; q < 5; ++q) {
      const Vec3 query = pts[rng.uniform_index(static_cast<std::uint64_t>(n))];
      const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));
      CHECK(tree.knn(query, k) == knn_brute_force(pts, query, k));
    }
  }
}

TEST_CASE("extract_patch: cube corner neighborhood") {
  std::vector<Vec3> cube;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cube.emplace_back(x, y, z);
  const PointCloud cloud(cube);

  const Patch patch = extract_patch(cloud, 0, 4);
  // Brute-force oracle: corner (0,0,0) itself plus the three adjacent corners.
  std::vector<std::pair<double, int>> dist;
  for (int i = 0; i < 8; ++i)
    dist.emplace_back((cube[static_cast<std::size_t>(i)] - cube[0]).squaredNorm(), i);
  std::sort(dist.begin(), dist.end());
  for (int i = 0; i < 4; ++i) CHECK(patch.source_indices[static_cast<std::size_t>(i)] == dist[static_cast<std::size_t>(i)].second);
  CHECK(patch.local_points[0].norm() == doctest::Approx(0.0));
}

TEST_CASE("extract_patch: k equal to cloud size returns a permutation") {
  Rng rng(7);
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i)
    pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  const PointCloud cloud(pts);
  const Patch patch = extract_patch(cloud, 5, 40);
  std::vector<int> sorted = patch.source_indices;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(40);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(sorted == expected);
}

TEST_CASE("extract_patch: canonical frame properties") {
  Rng rng(3);
  const Eigen::Matrix3d rot = oracles::random_rotation(rng);
  std::vector<Vec3> pts;
  for (int i = 0; i < 60; ++i) {
    const Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0);
    pts.push_back(rot * p + Vec3(0.3, -0.2, 0.9));
  }
  const PointCloud cloud(pts);
  const Patch patch = extract_patch(cloud, 10, 30);

  // Frame invariants.
  CHECK((patch.frame.rotation * patch.frame.rotation.transpose() -
         Eigen::Matrix3d::Identity())
            .norm() < 1e-9);
  CHECK(patch.frame.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(patch.frame.scale > 0.0);

  // Unit-radius scaling and query at origin.
  double max_norm = 0.0;
  for (const Vec3& p : patch.local_points) max_norm = std::max(max_norm, p.norm());
  CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(patch.local_points[0].norm() < 1e-12);

  // The plane normal maps to +-z in the canonical frame.
  const Vec3 world_normal = rot * Vec3(0, 0, 1);
  const Vec3 canon = patch.frame.rotation * world_normal;
  CHECK(std::abs(std::abs(canon.z()) - 1.0) < 1e-9);
}

TEST_CASE("extract_patch: errors") {
  const PointCloud tiny(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}});
  CHECK_THROWS_AS(extract_patch(tiny, 0, 3), SizeError);
  const PointCloud degenerate(std::vector<Vec3>{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  CHECK_THROWS_AS(extract_patch(degenerate, 0, 3), DegeneracyError);
}

TEST_CASE("pca_normal: planes") {
  const PointCloud cloud = plane_grid(8);
  const Patch patch = extract_patch(cloud, 20, 30);
  const UnitNormal n = pca_normal(patch);
  CHECK(std::abs(std::abs(n.direction.z()) - 1.0) < 1e-9);

  // Same samples rotated: normal is R * (0,0,1) up to sign.
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d rot = oracles::random_rotation(rng);
    std::vector<Vec3> pts;
    for (const Vec3& p : cloud.points) pts.push_back(rot * p);
    const Patch rotated = extract_patch(PointCloud(pts), 20, 30);
    const Vec3 expected = rot * Vec3(0, 0, 1);
    const double dot = std::abs(pca_normal(rotated).direction.dot(expected));
    CHECK(dot == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("pca_normal: analytic eigenvector of x+y+z=0 samples") {
  // 100 points spanning the plane x + y + z = 0.
  Rng rng(5);
  const Vec3 u = Vec3(1, -1, 0).normalized();
  const Vec3 v = Vec3(1, 1, -2).normalized();
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i)
    pts.push_back(rng.uniform(-1, 1) * u + rng.uniform(-1, 1) * v);
  const PointCloud cloud(pts);
  const Patch patch = extract_patch(cloud, 0, 100);
  const Vec3 n = pca_normal(patch).direction;
  const Vec3 expected = Vec3(1, 1, 1).normalized();
  CHECK(std::abs(std::abs(n.dot(expected)) - 1.0) < 1e-9);
}

TEST_CASE("pca_normal: collinear points raise degeneracy") {
  Patch patch;
  for (int i = 0; i < 5; ++i) patch.local_points.emplace_back(i * 0.25, 0.0, 0.0);
  CHECK_THROWS_AS(pca_normal(patch), DegeneracyError);
}

TEST_CASE("build_vandermonde: rows and term counts") {
  // Origin row at n=3: 10 terms, leading 1.
  const MatX m3 = build_vandermonde({{0.0, 0.0}}, JetOrder(3));
  CHECK(m3.cols() == 10);
  CHECK(m3(0, 0) == 1.0);
  CHECK(m3.row(0).tail(9).cwiseAbs().maxCoeff() == 0.0);

  const MatX m1 = build_vandermonde({{1.0, 2.0}}, JetOrder(1));
  CHECK(m1.row(0).isApprox(Eigen::RowVector3d(1, 1, 2)));

  const MatX m2 = build_vandermonde({{2.0, 3.0}}, JetOrder(2));
  Eigen::RowVectorXd expected(6);
  expected << 1, 2, 3, 4, 6, 9;
  CHECK(m2.row(0).isApprox(expected));

  for (int n = 1; n <= 6; ++n)
    CHECK(build_vandermonde({{0.5, -0.5}}, JetOrder(n)).cols() == (n + 1) * (n + 2) / 2);
}

TEST_CASE("vandermonde_partials: analytic rows") {
  const auto [mx1, my1] = vandermonde_partials({{0.7, -0.3}}, JetOrder(1));
  CHECK(mx1.row(0).isApprox(Eigen::RowVector3d(0, 1, 0)));
  CHECK(my1.row(0).isApprox(Eigen::RowVector3d(0, 0, 1)));

  const auto [mx2, my2] = vandermonde_partials({{2.0, 3.0}}, JetOrder(2));
  Eigen::RowVectorXd expected(6);
  expected << 0, 1, 0, 4, 3, 0;
  CHECK(mx2.row(0).isApprox(expected));
}

TEST_CASE("vandermonde_partials: matches central finite differences") {
  Rng rng(13);
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    const JetOrder order(1 + static_cast<int>(rng.uniform_index(4)));
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    const auto [mx, my] = vandermonde_partials({{x, y}}, order);
    const MatX px = build_vandermonde({{x + h, y}}, order);
    const MatX nx = build_vandermonde({{x - h, y}}, order);
    const MatX py = build_vandermonde({{x, y + h}}, order);
    const MatX ny = build_vandermonde({{x, y - h}}, order);
    CHECK((mx.row(0) - (px - nx).row(0) / (2 * h)).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((my.row(0) - (py - ny).row(0) / (2 * h)).cwiseAbs().maxCoeff() < 1e-7);
  }
}

TEST_CASE("solve_weighted_jet: exact fits") {
  Rng rng(17);
  Patch patch = oracles::random_identity_patch(rng, 40);

  // Plane z = 0: beta is identically zero.
  for (Vec3& p : patch.local_points) p.z() = 0.0;
  for (int n = 1; n <= 3; ++n) {
    const auto fit = solve_weighted_jet(patch, JetOrder(n), WeightVector::ones(40),
                                        OffsetVector::zeros(40));
    CHECK(fit.beta.cwiseAbs().maxCoeff() < 1e-12);
    CHECK_FALSE(fit.regularized);
  }

  // z = 0.5 x: exact linear fit.
  for (Vec3& p : patch.local_points) p.z() = 0.5 * p.x();
  const auto fit = solve_weighted_jet(patch, JetOrder(1), WeightVector::ones(40),
                                      OffsetVector::zeros(40));
  CHECK(fit.beta.isApprox(Eigen::Vector3d(0.0, 0.5, 0.0), 1e-12));
}

TEST_CASE("solve_weighted_jet: paraboloid grid against extended precision") {
  // 60 grid samples of z = 0.1 x^2 + 0.2 y^2.
  Patch patch;
  std::vector<Eigen::Vector2d> xy;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 10; ++j) {
      const double x = -1.0 + 2.0 * i / 5.0;
      const double y = -1.0 + 2.0 * j / 9.0;
      patch.local_points.emplace_back(x, y, 0.1 * x * x + 0.2 * y * y);
      xy.emplace_back(x, y);
    }
  const auto fit = solve_weighted_jet(patch, JetOrder(2), WeightVector::ones(60),
                                      OffsetVector::zeros(60));
  Eigen::VectorXd expected(6);
  expected << 0, 0, 0, 0.1, 0, 0.2;
  CHECK((fit.beta - expected).cwiseAbs().maxCoeff() < 1e-8);

  VecX z(60);
  for (int i = 0; i < 60; ++i) z[i] = patch.local_points[static_cast<std::size_t>(i)].z();
  const VecX oracle = oracles::normal_equations_extended(xy, z, VecX::Ones(60), 2);
  CHECK((fit.beta - oracle).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("solve_weighted_jet: near-zero weight excludes a point") {
  Rng rng(19);
  Patch patch = oracles::random_identity_patch(rng, 30);
  // Turn the last point into an outlier.
  patch.local_points.back() = Vec3(0.4, 0.1, 5.0);

  Patch excluded = patch;
  excluded.local_points.pop_back();

  WeightVector w = WeightVector::ones(30);
  w.weights[29] = 1e-12;  // epsilon floor relaxed for this check
  const auto with_w = solve_weighted_jet(patch, JetOrder(2), w, OffsetVector::zeros(30));
  const auto without = solve_weighted_jet(excluded, JetOrder(2),
                                          WeightVector::ones(29), OffsetVector::zeros(29));
  CHECK((with_w.beta - without.beta).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("solve_weighted_jet: weight floor vs full exclusion stays close") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Patch patch = oracles::random_identity_patch(rng, 30);
    patch.local_points.back() =
        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-10, 10));
    Patch excluded = patch;
    excluded.local_points.pop_back();

    WeightVector w = WeightVector::ones(30);
    w.weights[29] = WeightVector::kFloor;
    const auto with_w = solve_weighted_jet(patch, JetOrder(2), w, OffsetVector::zeros(30));
    const auto without = solve_weighted_jet(excluded, JetOrder(2),
                                            WeightVector::ones(29), OffsetVector::zeros(29));
    const double rel = (with_w.beta - without.beta).norm() /
                       std::max(1.0, without.beta.norm());
    CHECK(rel <= 1e-3);
  }
}

TEST_CASE("solve_weighted_jet: weight scaling invariance") {
  Rng rng(29);
  Patch patch = oracles::random_identity_patch(rng, 50);
  WeightVector w{VecX::NullaryExpr(50, [&](int) { return rng.uniform(0.05, 1.0); })};
  OffsetVector off = OffsetVector::zeros(50);
  const auto base = solve_weighted_jet(patch, JetOrder(3), w, off);
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    WeightVector scaled{c * w.weights};
    const auto fit = solve_weighted_jet(patch, JetOrder(3), scaled, off);
    CHECK((fit.beta - base.beta).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("solve_weighted_jet: errors") {
  Rng rng(31);
  Patch patch = oracles::random_identity_patch(rng, 5);
  CHECK_THROWS_AS(solve_weighted_jet(patch, JetOrder(2), WeightVector::ones(5),
                                     OffsetVector::zeros(5)),
                  SizeError);

  // Coincident points: rank-deficient normal equations, rescued by the
  // ridge and flagged.
  Patch flat;
  for (int i = 0; i < 10; ++i) flat.local_points.emplace_back(0.0, 0.0, 0.0);
  const auto rescued = solve_weighted_jet(flat, JetOrder(2), WeightVector::ones(10),
                                          OffsetVector::zeros(10));
  CHECK(rescued.regularized);
  CHECK(rescued.beta.allFinite());

  // Coordinates whose monomials overflow leave the system broken even
  // after the ridge.
  Patch huge;
  for (int i = 0; i < 10; ++i)
    huge.local_points.emplace_back(1e200 * (i + 1), 0.0, 1.0);
  CHECK_THROWS_AS(solve_weighted_jet(huge, JetOrder(2), WeightVector::ones(10),
                                     OffsetVector::zeros(10)),
                  ConditioningError);
}

TEST_CASE("solve_weighted_jet: matches gradient-descent oracle") {
  Rng rng(37);
  for (int trial = 0; trial < 25; ++trial) {
    const int order_n = 1 + static_cast<int>(rng.uniform_index(3));
    Patch patch = oracles::random_identity_patch(rng, 50);
    WeightVector w{VecX::NullaryExpr(50, [&](int) { return rng.uniform(1e-3, 1.0); })};
    OffsetVector off = OffsetVector::zeros(50);
    for (int i = 0; i < 50; ++i)
      for (int j = 0; j < 3; ++j) off.offsets(i, j) = rng.uniform(-0.25, 0.25);

    const auto fit = solve_weighted_jet(patch, JetOrder(order_n), w, off);
    const VecX gd = oracles::gradient_descent_wls(patch, JetOrder(order_n), w, off);
    const double rel = (fit.beta - gd).norm() / fit.beta.norm();
    CHECK(rel <= 1e-6);
  }
}

TEST_CASE("jet_normal: canonical cases") {
  JetCoefficients beta;
  beta.beta = VecX::Zero(6);
  LocalFrame identity;
  CHECK(jet_normal(beta, identity).direction.isApprox(Vec3(0, 0, 1)));

  beta.beta[1] = 0.5;
  const Vec3 n = jet_normal(beta, identity).direction;
  CHECK(n.x() == doctest::Approx(-0.4472).epsilon(1e-3));
  CHECK(n.y() == doctest::Approx(0.0));
  CHECK(n.z() == doctest::Approx(0.8944).epsilon(1e-3));

  Rng rng(41);
  LocalFrame frame;
  frame.rotation = oracles::random_rotation(rng);
  const Vec3 rotated = jet_normal(beta, frame).direction;
  CHECK(rotated.isApprox(frame.rotation.transpose() * n, 1e-12));
}

TEST_CASE("neighbor_normals: flat fit and paraboloid gradient") {
  Rng rng(43);
  Patch patch = oracles::random_identity_patch(rng, 20);

  JetCoefficients flat;
  flat.beta = VecX::Zero(6);
  for (const UnitNormal& n : neighbor_normals(flat, patch, JetOrder(2)))
    CHECK(n.direction.isApprox(Vec3(0, 0, 1)));

  // Fit the paraboloid exactly and evaluate Eq-6 normals at a known point.
  Patch para;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      const double x = -1.0 + 2.0 * i / 7.0;
      const double y = -1.0 + 2.0 * j / 7.0;
      para.local_points.emplace_back(x, y, 0.1 * x * x + 0.2 * y * y);
    }
  para.local_points[0] = Vec3(1.0, 0.0, 0.1);  // evaluation point (1, 0)
  const auto fit = solve_weighted_jet(para, JetOrder(2), WeightVector::ones(64),
                                      OffsetVector::zeros(64));
  const auto normals = neighbor_normals(fit, para, JetOrder(2));
  const Vec3 expected = Vec3(-0.2, 0.0, 1.0).normalized();
  CHECK((normals[0].direction - expected).norm() < 1e-6);

  // At the origin the neighbor normal equals jet_normal.
  Patch with_origin = para;
  with_origin.local_points[1] = Vec3(0, 0, 0);
  const auto fit2 = solve_weighted_jet(with_origin, JetOrder(2), WeightVector::ones(64),
                                       OffsetVector::zeros(64));
  const auto nn = neighbor_normals(fit2, with_origin, JetOrder(2));
  CHECK(nn[1].direction.isApprox(jet_normal(fit2, with_origin.frame).direction, 1e-12));
}

TEST_CASE("classical_jet_normal: plane, sphere cap, and definition") {
  // Plane samples give the exact normal.
  const PointCloud plane = plane_grid(8);
  const Patch plane_patch = extract_patch(plane, 27, 40);
  const Vec3 n = classical_jet_normal(plane_patch, JetOrder(2)).direction;
  CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-9);

  // Sphere cap: the order-2 jet recovers the radial direction within 0.5 deg.
  const double radius = 2.0;
  std::vector<Vec3> cap;
  Rng rng(47);
  cap.emplace_back(0, 0, radius);  // query at the pole
  for (int i = 1; i < 80; ++i) {
    const double theta = rng.uniform(0.0, 0.25);
    const double phi = rng.uniform(0.0, 2 * M_PI);
    cap.emplace_back(radius * std::sin(theta) * std::cos(phi),
                     radius * std::sin(theta) * std::sin(phi),
                     radius * std::cos(theta));
  }
  const Patch cap_patch = extract_patch(PointCloud(cap), 0, 80);
  const Vec3 cap_normal = classical_jet_normal(cap_patch, JetOrder(2)).direction;
  CHECK(angle_deg(cap_normal, Vec3(0, 0, 1)) < 0.5);

  // Definitional equality with the weighted solve at unit weights.
  const auto fit = solve_weighted_jet(cap_patch, JetOrder(2), WeightVector::ones(80),
                                      OffsetVector::zeros(80));
  CHECK(cap_normal == jet_normal(fit, cap_patch.frame).direction);
}

TEST_CASE("classical_jet_normal: rotation equivariance") {
  Rng rng(53);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-1, 1), y = rng.uniform(-1, 1);
    pts.emplace_back(x, y, 0.3 * x * x - 0.2 * y * y + 0.05 * x * y);
  }
  const PointCloud cloud(pts);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix3d rot = oracles::random_rotation(rng);
    std::vector<Vec3> rotated;
    for (const Vec3& p : pts) rotated.push_back(rot * p);
    const PointCloud rcloud(rotated);

    const int query = 20;
    const Patch patch = extract_patch(cloud, query, 50);
    const Patch rpatch = extract_patch(rcloud, query, 50);

    const Vec3 n_pca = pca_normal(patch).direction;
    const Vec3 rn_pca = pca_normal(rpatch).direction;
    CHECK(std::abs(std::abs(rn_pca.dot(rot * n_pca)) - 1.0) < 1e-6);

    const Vec3 n_jet = classical_jet_normal(patch, JetOrder(2)).direction;
    const Vec3 rn_jet = classical_jet_normal(rpatch, JetOrder(2)).direction;
    CHECK(std::abs(std::abs(rn_jet.dot(rot * n_jet)) - 1.0) < 1e-6);
  }
}
