// Forward pipeline: graph operations, transforms, and the differentiable
// patch -> (weights, offsets) -> normal composition.

#ifndef GRAPHFIT_NET_PIPELINE_HPP
#define GRAPHFIT_NET_PIPELINE_HPP

#include "graphfit/geom/jet.hpp"
#include "graphfit/net/model.hpp"

namespace graphfit::net {

using ad::Tape;
using Id = ad::Tape::Id;

/// k-nearest-neighbor table in feature space. Row i lists the k nearest
/// other rows (self excluded), ties broken by ascending index.
struct NeighborIndex {
  std::vector<int> flat;  // row-major N x k
  int n = 0;
  int k = 0;

  int at(int i, int j) const { return flat[static_cast<std::size_t>(i) * k + j]; }
};

NeighborIndex knn_feature_graph(const ad::Tensor& features, int k);

/// Edge features [f_j - f_i, f_i] for every (i, j in N(i)), flattened to
/// (N*k, 2C) with neighbor j varying fastest.
Id edge_features(Tape& tape, Id features, const NeighborIndex& idx);

/// One MLP unit: matmul, batch norm over the point axis, activation.
Id apply_mlp_unit(Tape& tape, const MlpUnit& unit, Id x, bool training);

Id apply_linear(Tape& tape, const Linear& lin, Id x);

/// EdgeConv: shared MLP over edge features followed by a channelwise max
/// over each point's neighbors.
Id graph_conv(Tape& tape, Id features, const NeighborIndex& idx,
              const MlpUnit& mlp, bool training);

struct AdaptiveFuse {
  Id fused;
  Id gate;             // s_F, one value per channel
  Id gate_complement;  // s_F' = 1 - s_F, exact by construction
};

/// Attention-gated convex combination of point features and neighborhood
/// features (equal shapes): fused = s .* F + (1 - s) .* F'.
AdaptiveFuse adaptive_fuse(Tape& tape, Id point_features, Id neighborhood_features,
                           const AttentionGate& gate);

/// Two-scale fusion: the large-scale graph-conv output is concatenated to
/// each feature of the small-scale neighborhood, mapped through a shared
/// MLP and max-pooled over the k2 axis.
Id multi_scale_layer(Tape& tape, Id features, Id branch1, const NeighborIndex& idx2,
                     const MlpUnit& ms_mlp, bool training);

struct TransformResult {
  Id output;  // transformed points / features
  Id matrix;  // the learned square transform
};

/// Learned pose transform: emits A (dim x dim, identity at init) and
/// right-multiplies the inputs by it.
TransformResult spatial_transform(Tape& tape, const Stn& stn, Id points,
                                  bool training);
TransformResult feature_transform(Tape& tape, const Stn& stn, Id features,
                                  bool training);

/// Full graph block as wired in the model (graph conv at k1, optional
/// adaptive fuse, optional multi-scale branch at k2).
Id graph_block_forward(Tape& tape, const Model& model, const GraphBlock& block,
                       Id features, bool training);

struct PipelineResult {
  Id weights;  // (N,) in (1e-4, 1]
  Id offsets;  // (N, 3) in [-0.25, 0.25]
  Id a1;       // 3x3 spatial transform
  Id a2;       // CxC feature transform
  Id fit_points;  // (N, 3) A1-transformed points plus offsets
};

/// Network forward pass on one canonicalized patch.
PipelineResult run_pipeline(Tape& tape, const Model& model,
                            const geom::Patch& patch, bool training);

struct FitResult {
  PipelineResult net;
  Id beta;                    // (N_n,) jet coefficients in the fit frame
  Id normal_world;            // (1, 3) unit query normal
  Id neighbor_normals_world;  // (N, 3) unit rows
  bool regularized = false;
};

/// Forward pass plus the differentiable weighted jet fit and normal
/// recovery (closed-form solve with backward through solve_spd).
FitResult fit_patch(Tape& tape, const Model& model, const geom::Patch& patch,
                    bool training);

/// Inference-mode conveniences over the tape machinery.
std::pair<geom::WeightVector, geom::OffsetVector> forward_values(
    const Model& model, const geom::Patch& patch);
geom::UnitNormal estimate_normal(const Model& model, const geom::Patch& patch);

}  // namespace graphfit::net

#endif  // GRAPHFIT_NET_PIPELINE_HPP
