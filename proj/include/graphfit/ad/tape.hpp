// Reverse-mode differentiation over a flat tape.
//
// Nodes are appended in evaluation order, which is already a topological
// order, so backward() is a single reverse sweep that visits each node
// exactly once. Every operation validates shapes up front and checks its
// output for non-finite values. Elementwise binary ops broadcast over
// leading axes only: the smaller operand's shape must equal a suffix of
// the larger one's.

#ifndef GRAPHFIT_AD_TAPE_HPP
#define GRAPHFIT_AD_TAPE_HPP

#include <functional>
#include <vector>

#include "graphfit/ad/tensor.hpp"

namespace graphfit::ad {

/// Running statistics of one batch-norm layer. Updated as a side effect of
/// training-mode forward passes; read in inference mode.
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.9;
  double eps = 1e-5;

  explicit BatchNormState(int channels = 0)
      : running_mean(Tensor::zeros({channels})),
        running_var(Tensor::full({channels}, 1.0)) {}
};

class Tape {
 public:
  using Id = int;

  // ---- leaves ----
  Id constant(Tensor value);
  Id param(Parameter& p);  // leaf bound to an external parameter

  // ---- elementwise (leading-axis broadcast) ----
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);
  Id div(Id a, Id b);

  Id scale(Id a, double c);
  Id add_scalar(Id a, double c);
  Id neg(Id a) { return scale(a, -1.0); }

  // ---- unary ----
  Id sigmoid(Id a);
  Id tanh(Id a);
  Id log(Id a);
  Id sqrt(Id a);  // backward takes the zero subgradient at x == 0
  Id leaky_relu(Id a, double slope);
  Id relu(Id a) { return leaky_relu(a, 0.0); }
  Id clamp_min(Id a, double floor);

  // ---- structure ----
  Id matmul(Id a, Id b);  // strictly (m,k) x (k,n)
  Id transpose(Id a);     // 2-D
  Id reshape(Id a, Shape shape);
  Id concat(const std::vector<Id>& parts, int axis);
  Id slice(Id a, int axis, int start, int len);
  Id gather_rows(Id a, std::vector<int> indices);  // along axis 0
  Id scale_rows(Id a, Id s);  // a: (N,...), s: (N,), row i scaled by s[i]
  Id cross_rows(Id a, Id b);  // (N,3) x (N,3), row-wise cross product

  // ---- reductions ----
  Id reduce_max(Id a, int axis);   // gradient routed to the first argmax
  Id reduce_mean(Id a, int axis);
  Id reduce_sum(Id a, int axis);
  Id reduce_sum_all(Id a);  // scalar

  // ---- compound ----
  Id batch_norm(Id x, Id gamma, Id beta, BatchNormState& state, bool training);

  /// Solve a*x = b for SPD a (K x K), b (K,). Backward: with upstream g,
  /// s = a^-1 g, then db = s and da = -(s x^T + x s^T)/2.
  Id solve_spd(Id a, Id b);

  /// Escape hatch for tests: a node with caller-supplied forward value and
  /// backward rule. The rule receives the upstream gradient and must
  /// accumulate into the inputs' gradients via add_grad().
  Id custom(const char* tag, std::vector<Id> inputs, Tensor value,
            std::function<void(Tape&, const Tensor&)> backward);

  // ---- access ----
  const Tensor& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  const Tensor& grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  const char* op_tag(Id id) const { return nodes_[static_cast<std::size_t>(id)].op; }
  const std::vector<Id>& inputs_of(Id id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Gradients of reachable nodes are
  /// populated and leaf gradients are accumulated into their bound
  /// Parameters. Throws ShapeError if the loss is not a scalar.
  void backward(Id loss);

  /// Accumulate into a node's gradient buffer (for custom backward rules).
  void add_grad(Id id, const Tensor& g);

 private:
  struct Node {
    const char* op;
    std::vector<Id> inputs;
    Tensor value;
    Tensor grad;
    bool grad_live = false;
    std::function<void(Tape&, const Tensor&)> backward;
    Parameter* bound = nullptr;
  };

  Id push(const char* op, std::vector<Id> inputs, Tensor value,
          std::function<void(Tape&, const Tensor&)> backward,
          Parameter* bound = nullptr);
  Tensor& grad_buf(Id id);

  std::vector<Node> nodes_;
};

}  // namespace graphfit::ad

#endif  // GRAPHFIT_AD_TAPE_HPP
