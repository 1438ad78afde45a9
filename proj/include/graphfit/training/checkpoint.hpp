// Checkpoint format: an ASCII header (version, model config as key=value
// lines, tensor manifest of name/shape/offset) followed by raw
// little-endian 64-bit float payloads in manifest order. Round trips are
// bit-exact.

#ifndef GRAPHFIT_TRAINING_CHECKPOINT_HPP
#define GRAPHFIT_TRAINING_CHECKPOINT_HPP

#include <optional>
#include <string>
#include <vector>

#include "graphfit/net/model.hpp"
#include "graphfit/training/adam.hpp"

namespace graphfit::training {

struct Checkpoint {
  int version = 1;
  net::ModelConfig config;
  int epoch = 0;
  std::uint64_t rng_state = 0;
  std::int64_t adam_step = 0;
  std::vector<std::pair<std::string, ad::Tensor>> tensors;

  const ad::Tensor* find(const std::string& name) const;
};

/// Serializes parameters, batch-norm buffers, and (when given) optimizer
/// moments.
void save_checkpoint(const std::string& path, const net::Model& model,
                     Adam* optimizer, int epoch, std::uint64_t rng_state);

/// Parses and validates a checkpoint file. Throws VersionError on a bad
/// magic/version line, TruncationError when the payload is shorter than
/// the manifest promises, and ParseError on a malformed header.
Checkpoint load_checkpoint(const std::string& path);

/// Builds a model with the checkpoint's config and installs its tensors.
/// Throws ShapeError if a stored tensor disagrees with the model's shapes.
net::Model restore_model(const Checkpoint& ckpt);

/// Installs optimizer moments saved alongside the model.
void restore_optimizer(Adam& adam, const net::Model& model, const Checkpoint& ckpt);

}  // namespace graphfit::training

#endif  // GRAPHFIT_TRAINING_CHECKPOINT_HPP
