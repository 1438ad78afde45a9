#include "graphfit/net/model.hpp"

#include <cmath>

namespace graphfit::net {

void ModelConfig::validate() const {
  if (jet_order < 1) throw ConfigError("config: jet_order must be >= 1");
  if (patch_size < (jet_order + 1) * (jet_order + 2) / 2)
    throw ConfigError("config: patch_size too small for the jet order");
  if (graph_block_count < 1 || graph_block_count > 3)
    throw ConfigError("config: graph_block_count must be in {1,2,3}");
  if (static_cast<int>(graph_block_widths.size()) < graph_block_count)
    throw ConfigError("config: need a width per graph block");
  if (point_conv_widths.empty() || head_widths.empty())
    throw ConfigError("config: widths must be non-empty");
  if (!(k2 < k1 && k1 <= patch_size - 1))
    throw ConfigError("config: need k2 < k1 <= patch_size - 1");
}

ad::Parameter& Model::add_param(const std::string& name, ad::Tensor value) {
  if (by_name_.count(name))
    throw ConfigError("model: duplicate parameter name '" + name + "'");
  params_.push_back(std::make_unique<ad::Parameter>(name, std::move(value)));
  by_name_[name] = params_.back().get();
  return *params_.back();
}

ad::BatchNormState& Model::add_bn_state(const std::string& name, int channels) {
  bn_states_.emplace_back(name, std::make_unique<ad::BatchNormState>(channels));
  return *bn_states_.back().second;
}

ad::Parameter* Model::find_param(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<ad::Parameter*> Model::parameter_ptrs() const {
  std::vector<ad::Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<std::pair<std::string, ad::Tensor*>> Model::buffers() const {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  for (const auto& [name, state] : bn_states_) {
    out.emplace_back(name + ".running_mean", &state->running_mean);
    out.emplace_back(name + ".running_var", &state->running_var);
  }
  return out;
}

void Model::zero_grads() const {
  for (const auto& p : params_) p->zero_grad();
}

namespace {

ad::Tensor xavier_uniform(Rng& rng, int fan_in, int fan_out) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  ad::Tensor t({fan_in, fan_out});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

MlpUnit make_mlp_unit(Model& m, Rng& rng, const std::string& name, int in,
                      int out, double slope) {
  MlpUnit unit;
  unit.weight = &m.add_param(name + ".weight", xavier_uniform(rng, in, out));
  unit.bn_gamma = &m.add_param(name + ".bn.gamma", ad::Tensor::full({out}, 1.0));
  unit.bn_beta = &m.add_param(name + ".bn.beta", ad::Tensor::zeros({out}));
  unit.bn = &m.add_bn_state(name + ".bn", out);
  unit.slope = slope;
  return unit;
}

Linear make_linear(Model& m, Rng& rng, const std::string& name, int in, int out) {
  Linear lin;
  lin.weight = &m.add_param(name + ".weight", xavier_uniform(rng, in, out));
  lin.bias = &m.add_param(name + ".bias", ad::Tensor::zeros({out}));
  return lin;
}

Linear make_identity_final(Model& m, const std::string& name, int in, int dim) {
  Linear lin;
  lin.weight = &m.add_param(name + ".weight", ad::Tensor::zeros({in, dim * dim}));
  ad::Tensor bias = ad::Tensor::zeros({dim * dim});
  for (int i = 0; i < dim; ++i) bias[static_cast<std::int64_t>(i) * dim + i] = 1.0;
  lin.bias = &m.add_param(name + ".bias", std::move(bias));
  return lin;
}

Stn make_stn(Model& m, Rng& rng, const std::string& name, int dim,
             const std::vector<int>& point_widths,
             const std::vector<int>& fc_widths) {
  Stn stn;
  stn.dim = dim;
  int width = dim;
  for (std::size_t i = 0; i < point_widths.size(); ++i) {
    stn.point_units.push_back(make_mlp_unit(
        m, rng, name + ".point" + std::to_string(i + 1), width, point_widths[i], 0.0));
    width = point_widths[i];
  }
  for (std::size_t i = 0; i < fc_widths.size(); ++i) {
    stn.fcs.push_back(
        make_linear(m, rng, name + ".fc" + std::to_string(i + 1), width, fc_widths[i]));
    width = fc_widths[i];
  }
  stn.final_fc = make_identity_final(m, name + ".final", width, dim);
  return stn;
}

}  // namespace

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config_ = config;
  Rng rng(derive_seed(seed, 0x6d6f64656cULL));  // independent init stream

  m.spatial = make_stn(m, rng, "stn", 3, config.stn_point_widths, config.stn_fc_widths);

  int width = 3;
  for (std::size_t i = 0; i < config.point_conv_widths.size(); ++i) {
    m.point_convs.push_back(make_mlp_unit(m, rng, "pconv" + std::to_string(i + 1),
                                          width, config.point_conv_widths[i], 0.0));
    width = config.point_conv_widths[i];
  }

  m.feature = make_stn(m, rng, "fstn", width, config.fstn_point_widths,
                       config.fstn_fc_widths);

  constexpr double kLeakySlope = 0.01;
  int head_in = 0;
  for (int b = 0; b < config.graph_block_count; ++b) {
    const std::string name = "block" + std::to_string(b + 1);
    GraphBlock block;
    block.in_channels = width;
    block.out_channels = config.graph_block_widths[static_cast<std::size_t>(b)];
    block.edge_mlp = make_mlp_unit(m, rng, name + ".edge", 2 * block.in_channels,
                                   block.out_channels, kLeakySlope);
    if (config.use_adaptive_module) {
      block.lift = make_mlp_unit(m, rng, name + ".lift", block.in_channels,
                                 block.out_channels, kLeakySlope);
      const int reduced = std::max(block.out_channels / 4, 4);
      block.gate.fc1 = make_linear(m, rng, name + ".gate1", block.out_channels, reduced);
      block.gate.fc2 = make_linear(m, rng, name + ".gate2", reduced, block.out_channels);
    }
    if (config.use_multi_scale) {
      block.ms_mlp = make_mlp_unit(m, rng, name + ".ms",
                                   block.in_channels + block.out_channels,
                                   block.out_channels, kLeakySlope);
    }
    m.blocks.push_back(block);
    width = block.out_channels;
    head_in += block.out_channels;
  }

  width = head_in;
  for (std::size_t i = 0; i < config.head_widths.size(); ++i) {
    m.head.hidden.push_back(make_mlp_unit(m, rng, "head" + std::to_string(i + 1),
                                          width, config.head_widths[i], 0.0));
    width = config.head_widths[i];
  }
  // Zero-initialized: the untrained model emits sigmoid(0) = 0.5 weights
  // and tanh(0) = 0 offsets, i.e. the plain unweighted fit.
  m.head.final_fc.weight = &m.add_param("head.final.weight", ad::Tensor::zeros({width, 4}));
  m.head.final_fc.bias = &m.add_param("head.final.bias", ad::Tensor::zeros({4}));
  return m;
}

}  // namespace graphfit::net
