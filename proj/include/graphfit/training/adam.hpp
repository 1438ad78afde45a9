// Adam optimizer with bias correction.

#ifndef GRAPHFIT_TRAINING_ADAM_HPP
#define GRAPHFIT_TRAINING_ADAM_HPP

#include <vector>

#include "graphfit/ad/tensor.hpp"

namespace graphfit::training {

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit Adam(std::vector<ad::Parameter*> params);

  /// One update from the gradients currently held in the parameters.
  void step(double lr);

  std::int64_t step_count() const { return t_; }
  void set_step_count(std::int64_t t) { t_ = t; }

  /// Moment buffers as named tensors ("adam.<param>.m" / ".v") for
  /// checkpointing.
  std::vector<std::pair<std::string, ad::Tensor*>> state_buffers();

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<ad::Tensor> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace graphfit::training

#endif  // GRAPHFIT_TRAINING_ADAM_HPP
