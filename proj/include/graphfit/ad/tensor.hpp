// Dense row-major 64-bit tensors. Shapes are small (rank <= 3 in practice);
// a rank-0 shape is a scalar of size 1.

#ifndef GRAPHFIT_AD_TENSOR_HPP
#define GRAPHFIT_AD_TENSOR_HPP

#include <Eigen/Core>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "graphfit/common.hpp"

namespace graphfit::ad {

using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape)
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(shape_size(shape_)), 0.0) {}
  Tensor(Shape shape, std::vector<double> values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (static_cast<std::int64_t>(data_.size()) != shape_size(shape_))
      throw ShapeError("Tensor: buffer length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor identity(int n) {
    Tensor t({n, n});
    for (int i = 0; i < n; ++i) t.data_[static_cast<std::size_t>(i * n + i)] = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double item() const {
    if (size() != 1) throw ShapeError("Tensor::item: size != 1, shape " + shape_string(shape_));
    return data_[0];
  }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// Row-major matrix view; the tensor must have exactly rows*cols entries.
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  mat(int rows, int cols) {
    if (static_cast<std::int64_t>(rows) * cols != size())
      throw ShapeError("Tensor::mat: cannot view " + shape_string(shape_) +
                       " as (" + std::to_string(rows) + "," + std::to_string(cols) + ")");
    return {data_.data(), rows, cols};
  }
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  mat(int rows, int cols) const {
    if (static_cast<std::int64_t>(rows) * cols != size())
      throw ShapeError("Tensor::mat: cannot view " + shape_string(shape_) +
                       " as (" + std::to_string(rows) + "," + std::to_string(cols) + ")");
    return {data_.data(), rows, cols};
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Learned tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

}  // namespace graphfit::ad

#endif  // GRAPHFIT_AD_TENSOR_HPP
