#include "netcast/layers.hpp"

#include <cmath>

#include "netcast/errors.hpp"

namespace netcast {

Tensor glorot_uniform(Rng& rng, std::vector<std::size_t> shape, std::size_t fan_in,
                      std::size_t fan_out) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0 * rng.uniform() - 1.0) * a;
  return t;
}

Var dense(Tape& t, Var w, Var b, Var x) { return t.add(t.matvec(w, x), b); }

Var conv1d_bias(Tape& t, Var kernel, Var b, Var x, std::size_t stride, std::size_t pad) {
  return t.add_rowwise(t.conv1d(kernel, x, stride, pad), b);
}

Var conv1d_transpose_bias(Tape& t, Var kernel, Var b, Var y, std::size_t stride,
                          std::size_t pad, std::size_t output_padding) {
  return t.add_rowwise(t.conv1d_transpose(kernel, y, stride, pad, output_padding), b);
}

std::pair<Var, Var> lstm_step(Tape& t, Var wx, Var wh, Var b, Var x, Var h, Var c) {
  std::size_t hidden = h.value().size();
  require(wx.value().rank() == 2 && wx.value().dim(0) == 4 * hidden, errc::shape_mismatch,
          "lstm_step: wx must have 4*hidden rows");
  Var pre = t.add(t.add(t.matvec(wx, x), t.matvec(wh, h)), b);
  Var gi = t.sigmoid(t.slice(pre, 0, {hidden}));
  Var gf = t.sigmoid(t.slice(pre, hidden, {hidden}));
  Var gg = t.tanh(t.slice(pre, 2 * hidden, {hidden}));
  Var go = t.sigmoid(t.slice(pre, 3 * hidden, {hidden}));
  Var c_next = t.add(t.mul(gf, c), t.mul(gi, gg));
  Var h_next = t.mul(go, t.tanh(c_next));
  return {h_next, c_next};
}

}  // namespace netcast
