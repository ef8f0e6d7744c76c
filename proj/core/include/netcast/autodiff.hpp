#pragma once

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "netcast/tensor.hpp"

namespace netcast {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid until Tape::clear().
struct Var {
  Tape* tape = nullptr;
  std::size_t idx = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  double scalar() const { return value()[0]; }
};

/// Reverse-mode tape. Operations append nodes whose parents always sit at
/// lower indices, so a single reverse sweep propagates gradients. With
/// grad_enabled=false the tape only evaluates forward (no grad buffers, no
/// closures), which is the inference fast path.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Drop all nodes (keeps allocated capacity). Outstanding Vars die.
  void clear();

  Var constant(Tensor v);
  /// Leaf bound to a trainable parameter; gradients accumulate into p.grad
  /// during backward(). Repeated calls for the same parameter return the
  /// same node.
  Var leaf(Parameter& p);

  // Elementwise binary ops; operand shapes must match.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  // Scalar broadcasts.
  Var add_scalar(Var a, double c);
  Var mul_scalar(Var a, double c);

  // Elementwise unary ops.
  Var neg(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var softplus(Var a);
  Var square(Var a);
  /// max(a, c) elementwise; gradient is zero where the floor is active.
  Var clamp_min(Var a, double c);

  // Reductions to a scalar.
  Var sum(Var a);
  Var mean(Var a);

  // Flat-index views.
  Var slice(Var a, std::size_t offset, std::vector<std::size_t> shape);
  Var concat(const std::vector<Var>& parts);
  /// Same values under a new shape of equal size.
  Var reshape(Var a, std::vector<std::size_t> shape);

  /// y = W x with W [m,n], x [n] -> [m].
  Var matvec(Var w, Var x);
  /// a [C,T] plus per-row bias b [C].
  Var add_rowwise(Var a, Var b);

  /// Cross-correlation: kernel [Co,Ci,k], input [Ci,T] -> [Co,T'] with
  /// T' = floor((T + 2*pad - k)/stride) + 1.
  Var conv1d(Var kernel, Var x, std::size_t stride, std::size_t pad);
  /// Adjoint of conv1d with a shared kernel layout [Co,Ci,k]: input [Co,T]
  /// -> [Ci, (T-1)*stride + k - 2*pad + output_padding].
  Var conv1d_transpose(Var kernel, Var y, std::size_t stride, std::size_t pad,
                       std::size_t output_padding);

  /// Reverse sweep from a scalar root; accumulates into bound parameters.
  void backward(Var root);

  const Tensor& value(std::size_t idx) const { return nodes_[idx].value; }
  Tensor& grad(std::size_t idx) { return nodes_[idx].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> back;
    Parameter* param = nullptr;
  };

  Var push(Tensor value, std::function<void(Tape&)> back);
  Var unary(Var a, double (*f)(double), double (*df)(double, double));

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> leaf_cache_;
};

}  // namespace netcast
