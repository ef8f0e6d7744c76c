#pragma once

#include <cstddef>
#include <vector>

#include "netcast/tensor.hpp"

namespace netcast {

/// Adam with bias correction (Kingma & Ba defaults).
class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(std::vector<Parameter*> params) : Adam(std::move(params), Options{}) {}
  Adam(std::vector<Parameter*> params, Options opts);

  /// One update from the gradients currently stored in the parameters;
  /// clears those gradients afterwards.
  void step();
  void zero_grad();

  std::size_t step_count() const { return step_; }
  const Options& options() const { return opts_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  Options opts_;
  std::size_t step_ = 0;
};

}  // namespace netcast
