#include "graphfit/training/trainer.hpp"

#include <algorithm>

namespace graphfit::training {

namespace {

constexpr std::uint64_t kSampleTag = 0x73616d70ULL;
constexpr std::uint64_t kShuffleTag = 0x73687566ULL;

}  // namespace

double lr_at_epoch(const TrainConfig& config, int epoch) {
  if (epoch < 0) throw ConfigError("lr_at_epoch: epoch must be >= 0");
  double lr = config.learning_rate;
  for (int decay : config.decay_epochs)
    if (epoch >= decay) lr *= config.decay_factor;
  return lr;
}

Trainer::Trainer(net::Model& model, TrainConfig config, LossWeights loss_weights)
    : model_(model),
      config_(std::move(config)),
      loss_weights_(loss_weights),
      adam_(model.parameter_ptrs()),
      rng_(derive_seed(config_.seed, 0x747261696eULL)) {
  config_.validate();
}

void Trainer::ensure_trees(const TrainingSet& data) {
  if (trees_.size() == data.shapes.size()) return;
  trees_.clear();
  for (const data::ShapeRecord& shape : data.shapes) {
    if (!shape.cloud.has_normals())
      throw ConfigError("train: shape '" + shape.name + "' has no ground-truth normals");
    trees_.push_back(std::make_unique<geom::KdTree>(shape.cloud.points));
  }
}

double Trainer::run_epoch(const TrainingSet& data) {
  if (data.shapes.empty()) throw ConfigError("train: empty dataset");
  ensure_trees(data);

  auto samples = data::sample_training_patches(
      data.shapes, data.per_shape, derive_seed(config_.seed, kSampleTag, static_cast<std::uint64_t>(epoch_)),
      data.query_pools);

  // Seed-deterministic shuffle.
  Rng shuffle_rng(derive_seed(config_.seed, kShuffleTag, static_cast<std::uint64_t>(epoch_)));
  for (std::size_t i = samples.size(); i > 1; --i)
    std::swap(samples[i - 1], samples[shuffle_rng.uniform_index(i)]);

  const int patch_size = model_.config().patch_size;
  const double lr = lr_at_epoch(config_, epoch_);
  double loss_sum = 0.0;

  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(config_.batch_size)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(config_.batch_size));
    const double inv_batch = 1.0 / static_cast<double>(end - begin);
    model_.zero_grads();
    for (std::size_t s = begin; s < end; ++s) {
      const data::ShapeRecord& shape = data.shapes[static_cast<std::size_t>(samples[s].shape_index)];
      const geom::Patch patch = geom::extract_patch(
          shape.cloud, *trees_[static_cast<std::size_t>(samples[s].shape_index)],
          samples[s].query_index, patch_size);

      PatchTarget target;
      target.query_normal = shape.cloud.normals[static_cast<std::size_t>(samples[s].query_index)];
      target.neighbor_normals.reserve(patch.size());
      for (int src : patch.source_indices)
        target.neighbor_normals.push_back(shape.cloud.normals[static_cast<std::size_t>(src)]);

      Tape tape;
      const net::FitResult fit = net::fit_patch(tape, model_, patch, true);
      const Id loss = total_loss(tape, fit, target, loss_weights_);
      loss_sum += tape.value(loss).item();
      tape.backward(tape.scale(loss, inv_batch));
    }
    adam_.step(lr);
  }
  ++epoch_;
  return loss_sum / static_cast<double>(samples.size());
}

std::vector<double> Trainer::run(const TrainingSet& data) {
  std::vector<double> losses;
  while (epoch_ < config_.epochs) losses.push_back(run_epoch(data));
  return losses;
}

void Trainer::save(const std::string& path) const {
  save_checkpoint(path, model_, const_cast<Adam*>(&adam_), epoch_, rng_.state());
}

void Trainer::resume(const std::string& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  net::Model restored = restore_model(ckpt);
  if (restored.parameters().size() != model_.parameters().size())
    throw ConfigError("resume: checkpoint config does not match the model");
  for (std::size_t i = 0; i < model_.parameters().size(); ++i) {
    ad::Parameter& dst = *model_.parameters()[i];
    const ad::Parameter& src = *restored.parameters()[i];
    if (dst.name != src.name || !dst.value.same_shape(src.value))
      throw ShapeError("resume: parameter mismatch at '" + dst.name + "'");
    dst.value = src.value;
  }
  const auto dst_buffers = model_.buffers();
  const auto src_buffers = restored.buffers();
  for (std::size_t i = 0; i < dst_buffers.size(); ++i)
    *dst_buffers[i].second = *src_buffers[i].second;
  restore_optimizer(adam_, model_, ckpt);
  epoch_ = ckpt.epoch;
  rng_.set_state(ckpt.rng_state);
}

std::vector<double> train(net::Model& model, const TrainingSet& data,
                          const TrainConfig& config, const LossWeights& weights) {
  Trainer trainer(model, config, weights);
  return trainer.run(data);
}

}  // namespace graphfit::training
