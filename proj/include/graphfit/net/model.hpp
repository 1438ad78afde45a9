// Model configuration and the learned-parameter container.
//
// The network maps a canonicalized patch to per-point fitting weights and
// offsets: two shared point convolutions lift coordinates into feature
// space, a learned 3x3 / CxC transform pair canonicalizes pose and
// features, a cascade of graph blocks encodes neighborhood structure, and
// a shared head emits one weight and a 3-offset per point.

#ifndef GRAPHFIT_NET_MODEL_HPP
#define GRAPHFIT_NET_MODEL_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "graphfit/ad/tape.hpp"

namespace graphfit::net {

struct ModelConfig {
  int jet_order = 3;
  int patch_size = 256;  // N_p
  std::vector<int> point_conv_widths = {64, 64};
  int graph_block_count = 2;
  std::vector<int> graph_block_widths = {128, 128};
  int k1 = 20;  // large scale s1
  int k2 = 10;  // small scale s2
  bool use_multi_scale = true;
  bool use_adaptive_module = true;
  std::vector<int> head_widths = {256, 128};
  // Pose / feature transform sub-networks (shared MLP widths, then
  // post-pool FC widths).
  std::vector<int> stn_point_widths = {32, 64};
  std::vector<int> stn_fc_widths = {32};
  std::vector<int> fstn_point_widths = {64, 128};
  std::vector<int> fstn_fc_widths = {64};

  int feature_width() const { return point_conv_widths.back(); }

  void validate() const;
};

/// Shared 1x1 convolution: matmul + batch norm + activation. slope is the
/// leaky-ReLU slope; 0 gives a plain ReLU.
struct MlpUnit {
  ad::Parameter* weight = nullptr;  // (in, out)
  ad::Parameter* bn_gamma = nullptr;
  ad::Parameter* bn_beta = nullptr;
  ad::BatchNormState* bn = nullptr;
  double slope = 0.0;
};

/// Plain affine layer (post-pool paths, gates, final regressors).
struct Linear {
  ad::Parameter* weight = nullptr;  // (in, out)
  ad::Parameter* bias = nullptr;    // (out,)
};

/// Pose-style transform network: shared point MLP, channelwise max pool,
/// FC stack, and a final layer initialized to produce the identity.
struct Stn {
  std::vector<MlpUnit> point_units;
  std::vector<Linear> fcs;
  Linear final_fc;
  int dim = 3;  // emits a dim x dim matrix
};

/// Sigmoid attention gate of the adaptive module (squeeze/excite style,
/// no batch norm: it runs on a single pooled vector).
struct AttentionGate {
  Linear fc1;  // C -> C/4
  Linear fc2;  // C/4 -> C
};

struct GraphBlock {
  MlpUnit edge_mlp;  // 2*in -> out
  // Adaptive-module path (present only when enabled in the config).
  MlpUnit lift;  // in -> out point-feature lift for the fuse
  AttentionGate gate;
  // Multi-scale branch 2 (present only when enabled).
  MlpUnit ms_mlp;  // (in + out) -> out
  int in_channels = 0;
  int out_channels = 0;
};

struct Head {
  std::vector<MlpUnit> hidden;
  Linear final_fc;  // -> 4 channels: weight logit + 3 offset logits
};

class Model {
 public:
  /// Builds all parameters for `config` with seeded Xavier-uniform init.
  /// Final regressor layers start at zero so the untrained model produces
  /// identity transforms, uniform weights, and zero offsets.
  static Model init(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  ad::Parameter& add_param(const std::string& name, ad::Tensor value);
  ad::BatchNormState& add_bn_state(const std::string& name, int channels);

  ad::Parameter* find_param(const std::string& name) const;

  const std::vector<std::unique_ptr<ad::Parameter>>& parameters() const {
    return params_;
  }
  std::vector<ad::Parameter*> parameter_ptrs() const;

  /// Batch-norm running statistics, exposed as named buffers for
  /// checkpointing: "<layer>.running_mean" / "<layer>.running_var".
  std::vector<std::pair<std::string, ad::Tensor*>> buffers() const;

  void zero_grads() const;

  // Structural views into the parameter set.
  Stn spatial;
  Stn feature;
  std::vector<MlpUnit> point_convs;
  std::vector<GraphBlock> blocks;
  Head head;

 private:
  ModelConfig config_;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
  std::vector<std::pair<std::string, std::unique_ptr<ad::BatchNormState>>> bn_states_;
  std::map<std::string, ad::Parameter*> by_name_;
};

}  // namespace graphfit::net

#endif  // GRAPHFIT_NET_MODEL_HPP
