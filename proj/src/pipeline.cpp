#include "graphfit/net/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace graphfit::net {

NeighborIndex knn_feature_graph(const ad::Tensor& features, int k) {
  if (features.rank() != 2)
    throw ShapeError("knn_feature_graph: features must be (N,C), got " +
                     shape_string(features.shape()));
  const int n = features.dim(0), c = features.dim(1);
  if (k < 1 || k >= n)
    throw SizeError("knn_feature_graph: k=" + std::to_string(k) +
                    " must satisfy 1 <= k < N=" + std::to_string(n));
  NeighborIndex idx;
  idx.n = n;
  idx.k = k;
  idx.flat.resize(static_cast<std::size_t>(n) * k);

  // Pairwise squared distances via the Gram matrix.
  const auto f = features.mat(n, c);
  const Eigen::VectorXd sq = f.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                       2.0 * (f * f.transpose());

  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[static_cast<std::size_t>(m++)] = {std::max(d2(i, j), 0.0), j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int j = 0; j < k; ++j)
      idx.flat[static_cast<std::size_t>(i) * k + j] = cand[static_cast<std::size_t>(j)].second;
  }
  return idx;
}

Id edge_features(Tape& tape, Id features, const NeighborIndex& idx) {
  const ad::Tensor& f = tape.value(features);
  if (f.rank() != 2 || f.dim(0) != idx.n)
    throw ShapeError("edge_features: features " + shape_string(f.shape()) +
                     " inconsistent with index table of " + std::to_string(idx.n) +
                     " rows");
  std::vector<int> center(static_cast<std::size_t>(idx.n) * idx.k);
  for (int i = 0; i < idx.n; ++i)
    for (int j = 0; j < idx.k; ++j)
      center[static_cast<std::size_t>(i) * idx.k + j] = i;
  const Id f_j = tape.gather_rows(features, idx.flat);
  const Id f_i = tape.gather_rows(features, std::move(center));
  return tape.concat({tape.sub(f_j, f_i), f_i}, 1);
}

Id apply_mlp_unit(Tape& tape, const MlpUnit& unit, Id x, bool training) {
  Id h = tape.matmul(x, tape.param(*unit.weight));
  h = tape.batch_norm(h, tape.param(*unit.bn_gamma), tape.param(*unit.bn_beta),
                      *unit.bn, training);
  return tape.leaky_relu(h, unit.slope);
}

Id apply_linear(Tape& tape, const Linear& lin, Id x) {
  return tape.add(tape.matmul(x, tape.param(*lin.weight)), tape.param(*lin.bias));
}

Id graph_conv(Tape& tape, Id features, const NeighborIndex& idx,
              const MlpUnit& mlp, bool training) {
  const Id edges = edge_features(tape, features, idx);
  const Id g = apply_mlp_unit(tape, mlp, edges, training);  // (N*k, C_out)
  const int c_out = tape.value(g).dim(1);
  return tape.reduce_max(tape.reshape(g, {idx.n, idx.k, c_out}), 1);
}

AdaptiveFuse adaptive_fuse(Tape& tape, Id point_features, Id neighborhood_features,
                           const AttentionGate& gate) {
  const ad::Tensor& fp = tape.value(point_features);
  const ad::Tensor& fn = tape.value(neighborhood_features);
  if (!fp.same_shape(fn))
    throw ShapeError("adaptive_fuse: shapes " + shape_string(fp.shape()) + " and " +
                     shape_string(fn.shape()) + " must match");
  const Id pooled = tape.reduce_mean(tape.add(neighborhood_features, point_features), 0);
  const int c = tape.value(pooled).dim(0);
  Id h = apply_linear(tape, gate.fc1, tape.reshape(pooled, {1, c}));
  h = tape.relu(h);
  h = apply_linear(tape, gate.fc2, h);
  AdaptiveFuse out;
  out.gate = tape.reshape(tape.sigmoid(h), {c});
  out.gate_complement =
      tape.sub(tape.constant(ad::Tensor::full({c}, 1.0)), out.gate);
  out.fused = tape.add(tape.mul(point_features, out.gate),
                       tape.mul(neighborhood_features, out.gate_complement));
  return out;
}

Id multi_scale_layer(Tape& tape, Id features, Id branch1, const NeighborIndex& idx2,
                     const MlpUnit& ms_mlp, bool training) {
  const int n = idx2.n, k = idx2.k;
  std::vector<int> center(static_cast<std::size_t>(n) * k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) center[static_cast<std::size_t>(i) * k + j] = i;
  const Id gathered = tape.gather_rows(features, idx2.flat);       // (N*k2, C_in)
  const Id tiled = tape.gather_rows(branch1, std::move(center));   // (N*k2, C_out)
  const Id cat = tape.concat({gathered, tiled}, 1);
  const Id h = apply_mlp_unit(tape, ms_mlp, cat, training);
  const int c_out = tape.value(h).dim(1);
  return tape.reduce_max(tape.reshape(h, {n, k, c_out}), 1);
}

namespace {

TransformResult stn_forward(Tape& tape, const Stn& stn, Id input, bool training) {
  Id h = input;
  for (const MlpUnit& unit : stn.point_units)
    h = apply_mlp_unit(tape, unit, h, training);
  const int c = tape.value(h).dim(1);
  Id pooled = tape.reshape(tape.reduce_max(h, 0), {1, c});
  for (const Linear& fc : stn.fcs)
    pooled = tape.relu(apply_linear(tape, fc, pooled));
  const Id flat = apply_linear(tape, stn.final_fc, pooled);
  TransformResult out;
  out.matrix = tape.reshape(flat, {stn.dim, stn.dim});
  out.output = tape.matmul(input, out.matrix);
  return out;
}

}  // namespace

TransformResult spatial_transform(Tape& tape, const Stn& stn, Id points,
                                  bool training) {
  return stn_forward(tape, stn, points, training);
}

TransformResult feature_transform(Tape& tape, const Stn& stn, Id features,
                                  bool training) {
  return stn_forward(tape, stn, features, training);
}

Id graph_block_forward(Tape& tape, const Model& model, const GraphBlock& block,
                       Id features, bool training) {
  const ModelConfig& cfg = model.config();
  const NeighborIndex idx1 = knn_feature_graph(tape.value(features), cfg.k1);
  Id branch1 = graph_conv(tape, features, idx1, block.edge_mlp, training);
  if (cfg.use_adaptive_module) {
    const Id lifted = apply_mlp_unit(tape, block.lift, features, training);
    branch1 = adaptive_fuse(tape, lifted, branch1, block.gate).fused;
  }
  if (!cfg.use_multi_scale) return branch1;
  const NeighborIndex idx2 = knn_feature_graph(tape.value(features), cfg.k2);
  return multi_scale_layer(tape, features, branch1, idx2, block.ms_mlp, training);
}

PipelineResult run_pipeline(Tape& tape, const Model& model,
                            const geom::Patch& patch, bool training) {
  const ModelConfig& cfg = model.config();
  const int n = static_cast<int>(patch.size());
  if (n != cfg.patch_size)
    throw ShapeError("run_pipeline: patch has " + std::to_string(n) +
                     " points but the model expects " + std::to_string(cfg.patch_size));

  ad::Tensor pts({n, 3});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j)
      pts[static_cast<std::int64_t>(i) * 3 + j] = patch.local_points[static_cast<std::size_t>(i)][j];

  PipelineResult out;
  const TransformResult pose = spatial_transform(tape, model.spatial, tape.constant(std::move(pts)), training);
  out.a1 = pose.matrix;

  Id h = pose.output;
  for (const MlpUnit& unit : model.point_convs)
    h = apply_mlp_unit(tape, unit, h, training);

  const TransformResult feat = feature_transform(tape, model.feature, h, training);
  out.a2 = feat.matrix;
  h = feat.output;

  std::vector<Id> block_outputs;
  for (const GraphBlock& block : model.blocks) {
    h = graph_block_forward(tape, model, block, h, training);
    block_outputs.push_back(h);
  }
  Id skip = block_outputs.size() == 1 ? block_outputs[0] : tape.concat(block_outputs, 1);

  for (const MlpUnit& unit : model.head.hidden)
    skip = apply_mlp_unit(tape, unit, skip, training);
  const Id raw = apply_linear(tape, model.head.final_fc, skip);  // (N, 4)

  const Id weight_logit = tape.reshape(tape.slice(raw, 1, 0, 1), {n});
  out.weights = tape.clamp_min(tape.sigmoid(weight_logit), geom::WeightVector::kFloor);
  out.offsets = tape.scale(tape.tanh(tape.slice(raw, 1, 1, 3)), geom::OffsetVector::kClamp);
  out.fit_points = tape.add(pose.output, out.offsets);
  return out;
}

namespace {

// Monomial column tensors (N,1) for x^a y^b through total degree `order`,
// in the library's graded-lex ordering, plus the analytic partials.
struct MonomialColumns {
  std::vector<Id> value, dx, dy;
};

MonomialColumns monomial_columns(Tape& tape, Id x, Id y, int order, int n) {
  std::vector<Id> xp{tape.constant(ad::Tensor::full({n, 1}, 1.0))};
  std::vector<Id> yp{xp[0]};
  for (int p = 1; p <= order; ++p) {
    xp.push_back(tape.mul(xp.back(), x));
    yp.push_back(tape.mul(yp.back(), y));
  }
  const Id zeros = tape.constant(ad::Tensor::zeros({n, 1}));
  auto term = [&](int a, int b) {
    if (a == 0 && b == 0) return xp[0];
    if (a == 0) return yp[static_cast<std::size_t>(b)];
    if (b == 0) return xp[static_cast<std::size_t>(a)];
    return tape.mul(xp[static_cast<std::size_t>(a)], yp[static_cast<std::size_t>(b)]);
  };
  MonomialColumns cols;
  for (int degree = 0; degree <= order; ++degree)
    for (int bpow = 0; bpow <= degree; ++bpow) {
      const int apow = degree - bpow;
      cols.value.push_back(term(apow, bpow));
      cols.dx.push_back(apow == 0 ? zeros : tape.scale(term(apow - 1, bpow), apow));
      cols.dy.push_back(bpow == 0 ? zeros : tape.scale(term(apow, bpow - 1), bpow));
    }
  return cols;
}

// Unit-normalize each row of an (N,3) tensor.
Id normalize_rows(Tape& tape, Id rows) {
  const int n = tape.value(rows).dim(0);
  const Id norms = tape.sqrt(tape.reduce_sum(tape.mul(rows, rows), 1));
  const Id inv = tape.div(tape.constant(ad::Tensor::full({n}, 1.0)), norms);
  return tape.scale_rows(rows, inv);
}

// solve_spd with the same ridge fallback as the closed-form geometry path.
Id solve_with_ridge(Tape& tape, Id a, Id rhs, bool& regularized) {
  try {
    return tape.solve_spd(a, rhs);
  } catch (const ConditioningError&) {
    const ad::Tensor& av = tape.value(a);
    const int k = av.dim(0);
    double trace = 0.0;
    for (int i = 0; i < k; ++i) trace += av[static_cast<std::int64_t>(i) * k + i];
    ad::Tensor ridge = ad::Tensor::zeros({k, k});
    const double lambda = 1e-9 * trace / k;
    for (int i = 0; i < k; ++i) ridge[static_cast<std::int64_t>(i) * k + i] = lambda;
    regularized = true;
    return tape.solve_spd(tape.add(a, tape.constant(std::move(ridge))), rhs);
  }
}

}  // namespace

FitResult fit_patch(Tape& tape, const Model& model, const geom::Patch& patch,
                    bool training) {
  FitResult fit;
  fit.net = run_pipeline(tape, model, patch, training);
  const int n = static_cast<int>(patch.size());
  const int order = model.config().jet_order;
  const int terms = (order + 1) * (order + 2) / 2;

  const Id x = tape.slice(fit.net.fit_points, 1, 0, 1);
  const Id y = tape.slice(fit.net.fit_points, 1, 1, 1);
  const Id z = tape.reshape(tape.slice(fit.net.fit_points, 1, 2, 1), {n, 1});

  const MonomialColumns cols = monomial_columns(tape, x, y, order, n);
  const Id m = tape.concat(cols.value, 1);   // (N, terms)
  const Id mx = tape.concat(cols.dx, 1);
  const Id my = tape.concat(cols.dy, 1);

  // beta = (M^T W M)^-1 M^T W z with W = diag(weights).
  const Id wm = tape.scale_rows(m, fit.net.weights);
  const Id gram = tape.matmul(tape.transpose(wm), m);
  const Id rhs = tape.reshape(tape.matmul(tape.transpose(wm), z), {terms});
  fit.beta = solve_with_ridge(tape, gram, rhs, fit.regularized);

  // Canonical-to-world direction map as row-vector algebra:
  // n_world_row = n_row * A1^T * R  (columns: R^T A1 n).
  const auto& rot = patch.frame.rotation;
  ad::Tensor r_const({3, 3});
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r_const[static_cast<std::int64_t>(i) * 3 + j] = rot(i, j);
  const Id to_world = tape.matmul(tape.transpose(fit.net.a1), tape.constant(std::move(r_const)));

  // Query normal from (-beta1, -beta2, 1).
  const Id head = tape.scale(tape.reshape(tape.slice(fit.beta, 0, 1, 2), {1, 2}), -1.0);
  const Id one_row = tape.constant(ad::Tensor::full({1, 1}, 1.0));
  const Id n_fit = normalize_rows(tape, tape.concat({head, one_row}, 1));
  fit.normal_world = normalize_rows(tape, tape.matmul(n_fit, to_world));

  // Neighbor normals from the implicit-surface gradient at every point.
  const Id beta_col = tape.reshape(fit.beta, {terms, 1});
  const Id gx = tape.scale(tape.matmul(mx, beta_col), -1.0);
  const Id gy = tape.scale(tape.matmul(my, beta_col), -1.0);
  const Id ones_col = tape.constant(ad::Tensor::full({n, 1}, 1.0));
  const Id nbrs = normalize_rows(tape, tape.concat({gx, gy, ones_col}, 1));
  fit.neighbor_normals_world = normalize_rows(tape, tape.matmul(nbrs, to_world));
  return fit;
}

std::pair<geom::WeightVector, geom::OffsetVector> forward_values(
    const Model& model, const geom::Patch& patch) {
  Tape tape;
  const PipelineResult res = run_pipeline(tape, model, patch, false);
  const ad::Tensor& w = tape.value(res.weights);
  const ad::Tensor& off = tape.value(res.offsets);
  const int n = w.dim(0);
  geom::WeightVector weights{geom::VecX(n)};
  geom::OffsetVector offsets{geom::MatX(n, 3)};
  for (int i = 0; i < n; ++i) {
    weights.weights[i] = w[i];
    for (int j = 0; j < 3; ++j)
      offsets.offsets(i, j) = off[static_cast<std::int64_t>(i) * 3 + j];
  }
  return {std::move(weights), std::move(offsets)};
}

geom::UnitNormal estimate_normal(const Model& model, const geom::Patch& patch) {
  Tape tape;
  const FitResult fit = fit_patch(tape, model, patch, false);
  const ad::Tensor& nw = tape.value(fit.normal_world);
  return geom::UnitNormal{geom::Vec3(nw[0], nw[1], nw[2]).normalized()};
}

}  // namespace graphfit::net
