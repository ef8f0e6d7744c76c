#pragma once

#include <cstddef>
#include <utility>

#include "netcast/autodiff.hpp"
#include "netcast/rng.hpp"
#include "netcast/tensor.hpp"

namespace netcast {

/// Glorot-uniform init on [-a, a] with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out);

/// y = W x + b. Weights are Vars so they may be tape-built (e.g. sampled
/// Bayesian weights) or plain parameter leaves.
Var dense(Tape& t, Var w, Var b, Var x);

/// Convolution block: conv1d then per-channel bias.
Var conv1d_bias(Tape& t, Var kernel, Var b, Var x, std::size_t stride, std::size_t pad);
/// Transposed-convolution block with per-channel bias.
Var conv1d_transpose_bias(Tape& t, Var kernel, Var b, Var y, std::size_t stride,
                          std::size_t pad, std::size_t output_padding);

/// One LSTM cell update. Weights: wx [4H,I], wh [4H,H], b [4H]; the four
/// gates occupy rows [input, forget, cell, output] in that order. Returns
/// {h_next, c_next}, each [H].
std::pair<Var, Var> lstm_step(Tape& t, Var wx, Var wh, Var b, Var x, Var h, Var c);

}  // namespace netcast
