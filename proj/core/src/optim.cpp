#include "netcast/optim.hpp"

#include <cmath>

namespace netcast {

Adam::Adam(std::vector<Parameter*> params, Options opts)
    : params_(std::move(params)), opts_(opts) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.push_back(Tensor::zeros_like(p->value));
    v_.push_back(Tensor::zeros_like(p->value));
  }
}

void Adam::step() {
  ++step_;
  double b1t = 1.0 - std::pow(opts_.beta1, static_cast<double>(step_));
  double b2t = 1.0 - std::pow(opts_.beta2, static_cast<double>(step_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Parameter& p = *params_[pi];
    Tensor& m = m_[pi];
    Tensor& v = v_[pi];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      double g = p.grad[i];
      m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
      v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
      double mhat = m[i] / b1t;
      double vhat = v[i] / b2t;
      p.value[i] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
    p.zero_grad();
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace netcast
