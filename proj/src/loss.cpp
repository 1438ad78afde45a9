#include "graphfit/training/loss.hpp"

namespace graphfit::training {

namespace {

ad::Tensor row3(const geom::Vec3& v) {
  return ad::Tensor({1, 3}, {v.x(), v.y(), v.z()});
}

}  // namespace

Id angle_loss(Tape& tape, Id n_hat, const geom::Vec3& n_gt) {
  const Id cross = tape.cross_rows(tape.constant(row3(n_gt)), n_hat);
  return tape.sqrt(tape.reduce_sum_all(tape.mul(cross, cross)));
}

double angle_loss_value(const geom::Vec3& n_gt, const geom::Vec3& n_hat) {
  return n_gt.cross(n_hat).norm();
}

Id consistency_loss(Tape& tape, Id weights, Id neighbor_hat,
                    const std::vector<geom::Vec3>& neighbor_gt, double lambda1,
                    double lambda2) {
  const ad::Tensor& w = tape.value(weights);
  const int n = w.dim(0);
  if (static_cast<int>(neighbor_gt.size()) != n ||
      tape.value(neighbor_hat).dim(0) != n)
    throw ShapeError("consistency_loss: weights, predictions, and targets must "
                     "have equal length");

  ad::Tensor gt({n, 3});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j)
      gt[static_cast<std::int64_t>(i) * 3 + j] = neighbor_gt[static_cast<std::size_t>(i)][j];

  const Id cross = tape.cross_rows(tape.constant(std::move(gt)), neighbor_hat);
  const Id residual = tape.sqrt(tape.reduce_sum(tape.mul(cross, cross), 1));  // (N,)
  const Id weighted = tape.reduce_sum_all(tape.mul(weights, residual));
  const Id barrier = tape.reduce_sum_all(tape.log(weights));
  return tape.scale(tape.add(tape.scale(barrier, -lambda1), tape.scale(weighted, lambda2)),
                    1.0 / n);
}

Id orthogonality_loss(Tape& tape, Id a) {
  const ad::Tensor& av = tape.value(a);
  if (av.rank() != 2 || av.dim(0) != av.dim(1))
    throw ShapeError("orthogonality_loss: matrix must be square, got " +
                     shape_string(av.shape()));
  const Id residual = tape.sub(tape.constant(ad::Tensor::identity(av.dim(0))),
                               tape.matmul(a, tape.transpose(a)));
  return tape.sqrt(tape.reduce_sum_all(tape.mul(residual, residual)));
}

double orthogonality_loss_value(const Eigen::MatrixXd& a) {
  return (Eigen::MatrixXd::Identity(a.rows(), a.cols()) - a * a.transpose()).norm();
}

Id total_loss(Tape& tape, const net::FitResult& fit, const PatchTarget& target,
              const LossWeights& weights) {
  Id loss = angle_loss(tape, fit.normal_world, target.query_normal);
  loss = tape.add(loss, consistency_loss(tape, fit.net.weights,
                                         fit.neighbor_normals_world,
                                         target.neighbor_normals,
                                         weights.lambda1, weights.lambda2));
  loss = tape.add(loss, tape.scale(orthogonality_loss(tape, fit.net.a1), weights.lambda3));
  loss = tape.add(loss, tape.scale(orthogonality_loss(tape, fit.net.a2), weights.lambda4));
  return loss;
}

}  // namespace graphfit::training
