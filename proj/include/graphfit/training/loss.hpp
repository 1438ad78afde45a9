// Training losses: unoriented angle loss, weighted consistency loss over
// neighbor normals, and the transform orthogonality regularizers.

#ifndef GRAPHFIT_TRAINING_LOSS_HPP
#define GRAPHFIT_TRAINING_LOSS_HPP

#include "graphfit/net/pipeline.hpp"

namespace graphfit::training {

using ad::Tape;
using Id = ad::Tape::Id;

/// Loss term weights; defaults follow the reference training recipe.
struct LossWeights {
  double lambda1 = 0.05;  // -log(w) barrier
  double lambda2 = 0.25;  // weighted neighbor-consistency term
  double lambda3 = 0.1;   // spatial-transform regularizer
  double lambda4 = 0.01;  // feature-transform regularizer
};

/// Ground truth for one patch, world frame.
struct PatchTarget {
  geom::Vec3 query_normal;
  std::vector<geom::Vec3> neighbor_normals;  // per patch point
};

/// || n_gt x n_hat ||_2 (= |sin| of the angle); n_hat is a (1,3) node.
Id angle_loss(Tape& tape, Id n_hat, const geom::Vec3& n_gt);

/// Plain-value convenience for tests and evaluation.
double angle_loss_value(const geom::Vec3& n_gt, const geom::Vec3& n_hat);

/// (1/N) [ -l1 * sum log w_j + l2 * sum w_j ||n_gt_j x n_hat_j|| ] with
/// n_hat a (N,3) node and weights an (N,) node.
Id consistency_loss(Tape& tape, Id weights, Id neighbor_hat,
                    const std::vector<geom::Vec3>& neighbor_gt, double lambda1,
                    double lambda2);

/// Frobenius norm of I - A A^T for a square (K,K) node.
Id orthogonality_loss(Tape& tape, Id a);

double orthogonality_loss_value(const Eigen::MatrixXd& a);

/// Four-term per-patch loss:
/// angle + consistency + l3 * ||I - A1 A1^T|| + l4 * ||I - A2 A2^T||.
Id total_loss(Tape& tape, const net::FitResult& fit, const PatchTarget& target,
              const LossWeights& weights);

}  // namespace graphfit::training

#endif  // GRAPHFIT_TRAINING_LOSS_HPP
