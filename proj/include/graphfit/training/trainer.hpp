// Training loop: epoch-level patch resampling, shuffled mini-batches,
// Adam updates on the mean batch loss, and checkpoint-based resume. All
// randomness is derived from (seed, epoch) so a resumed run reproduces an
// uninterrupted one bit for bit.

#ifndef GRAPHFIT_TRAINING_TRAINER_HPP
#define GRAPHFIT_TRAINING_TRAINER_HPP

#include <memory>

#include "graphfit/data/dataset.hpp"
#include "graphfit/geom/kdtree.hpp"
#include "graphfit/training/checkpoint.hpp"
#include "graphfit/training/loss.hpp"

namespace graphfit::training {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 1e-3;
  int epochs = 600;
  std::vector<int> decay_epochs = {200, 500};
  double decay_factor = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
    if (decay_factor <= 0.0 || decay_factor > 1.0)
      throw ConfigError("train: decay_factor must be in (0,1]");
    if (batch_size < 1 || epochs < 0) throw ConfigError("train: bad batch/epoch count");
  }
};

/// Initial rate times decay_factor once per decay epoch already passed.
double lr_at_epoch(const TrainConfig& config, int epoch);

struct TrainingSet {
  std::vector<data::ShapeRecord> shapes;
  /// Optional per-shape pools of allowed query indices (empty = any point).
  std::vector<std::vector<int>> query_pools;
  int per_shape = 1024;
};

class Trainer {
 public:
  Trainer(net::Model& model, TrainConfig config, LossWeights loss_weights);

  /// Trains from the current epoch through config.epochs; returns the
  /// per-epoch mean losses of the epochs it ran.
  std::vector<double> run(const TrainingSet& data);

  /// One epoch of shuffled mini-batches; returns the epoch's mean loss.
  double run_epoch(const TrainingSet& data);

  int epoch() const { return epoch_; }
  Adam& optimizer() { return adam_; }

  void save(const std::string& path) const;

  /// Restores parameters, optimizer moments, epoch counter, and RNG from a
  /// checkpoint written by save(). The model must match the checkpoint's
  /// config.
  void resume(const std::string& path);

 private:
  net::Model& model_;
  TrainConfig config_;
  LossWeights loss_weights_;
  Adam adam_;
  int epoch_ = 0;
  Rng rng_;
  std::vector<std::unique_ptr<geom::KdTree>> trees_;

  void ensure_trees(const TrainingSet& data);
};

/// One-call training: validates the config and runs every epoch.
/// Returns the per-epoch loss trace.
std::vector<double> train(net::Model& model, const TrainingSet& data,
                          const TrainConfig& config, const LossWeights& weights);

}  // namespace graphfit::training

#endif  // GRAPHFIT_TRAINING_TRAINER_HPP
