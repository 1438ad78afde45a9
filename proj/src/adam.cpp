#include "graphfit/training/adam.hpp"

#include <cmath>

namespace graphfit::training {

Adam::Adam(std::vector<ad::Parameter*> params) : params_(std::move(params)) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ad::Parameter* p : params_) {
    m_.push_back(ad::Tensor::zeros(p->value.shape()));
    v_.push_back(ad::Tensor::zeros(p->value.shape()));
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    for (std::int64_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = kBeta1 * m_[i][j] + (1.0 - kBeta1) * g;
      v_[i][j] = kBeta2 * v_[i][j] + (1.0 - kBeta2) * g * g;
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      p.value[j] -= lr * m_hat / (std::sqrt(v_hat) + kEps);
    }
  }
}

std::vector<std::pair<std::string, ad::Tensor*>> Adam::state_buffers() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back("adam." + params_[i]->name + ".m", &m_[i]);
    out.emplace_back("adam." + params_[i]->name + ".v", &v_[i]);
  }
  return out;
}

}  // namespace graphfit::training
