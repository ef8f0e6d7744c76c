#include "netcast/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <utility>

#include "netcast/mathfn.hpp"

namespace netcast {

const Tensor& Var::value() const { return tape->value(idx); }
const Tensor& Var::grad() const { return tape->grad(idx); }

void Tape::clear() {
  nodes_.clear();
  leaf_cache_.clear();
}

Var Tape::push(Tensor value, std::function<void(Tape&)> back) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    n.grad = Tensor::zeros_like(n.value);
    n.back = std::move(back);
  }
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor v) { return push(std::move(v), nullptr); }

Var Tape::leaf(Parameter& p) {
  auto it = leaf_cache_.find(&p);
  if (it != leaf_cache_.end()) return Var{this, it->second};
  Var v = push(p.value, nullptr);
  if (grad_enabled_) nodes_[v.idx].param = &p;
  leaf_cache_.emplace(&p, v.idx);
  return v;
}

Var Tape::add(Var a, Var b) {
  require(a.value().same_shape(b.value()), errc::shape_mismatch,
          "add: " + a.value().shape_str() + " vs " + b.value().shape_str());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  std::size_t ai = a.idx, bi = b.idx, self = nodes_.size();
  return push(std::move(out), [ai, bi, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    Tensor& gb = t.nodes_[bi].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] += g[i];
    }
  });
}

Var Tape::sub(Var a, Var b) {
  require(a.value().same_shape(b.value()), errc::shape_mismatch,
          "sub: " + a.value().shape_str() + " vs " + b.value().shape_str());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  std::size_t ai = a.idx, bi = b.idx, self = nodes_.size();
  return push(std::move(out), [ai, bi, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    Tensor& gb = t.nodes_[bi].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  });
}

Var Tape::mul(Var a, Var b) {
  require(a.value().same_shape(b.value()), errc::shape_mismatch,
          "mul: " + a.value().shape_str() + " vs " + b.value().shape_str());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  std::size_t ai = a.idx, bi = b.idx, self = nodes_.size();
  return push(std::move(out), [ai, bi, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& av = t.nodes_[ai].value;
    const Tensor& bv2 = t.nodes_[bi].value;
    Tensor& ga = t.nodes_[ai].grad;
    Tensor& gb = t.nodes_[bi].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * bv2[i];
      gb[i] += g[i] * av[i];
    }
  });
}

Var Tape::div(Var a, Var b) {
  require(a.value().same_shape(b.value()), errc::shape_mismatch,
          "div: " + a.value().shape_str() + " vs " + b.value().shape_str());
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= bv[i];
  std::size_t ai = a.idx, bi = b.idx, self = nodes_.size();
  return push(std::move(out), [ai, bi, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    const Tensor& bv2 = t.nodes_[bi].value;
    Tensor& ga = t.nodes_[ai].grad;
    Tensor& gb = t.nodes_[bi].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] / bv2[i];
      gb[i] -= g[i] * y[i] / bv2[i];
    }
  });
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  std::size_t ai = a.idx, self = nodes_.size();
  return push(std::move(out), [ai, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::mul_scalar(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  std::size_t ai = a.idx, self = nodes_.size();
  return push(std::move(out), [ai, self, c](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

Var Tape::neg(Var a) { return mul_scalar(a, -1.0); }

namespace {
double f_exp(double x) { return std::exp(x); }
double df_exp(double, double y) { return y; }
double f_log(double x) { return std::log(x); }
double df_log(double x, double) { return 1.0 / x; }
double f_tanh(double x) { return std::tanh(x); }
double df_tanh(double, double y) { return 1.0 - y * y; }
double f_sigmoid(double x) { return sigmoid(x); }
double df_sigmoid(double, double y) { return y * (1.0 - y); }
double f_relu(double x) { return x > 0.0 ? x : 0.0; }
double df_relu(double x, double) { return x > 0.0 ? 1.0 : 0.0; }
double f_softplus(double x) { return softplus(x); }
double df_softplus(double x, double) { return sigmoid(x); }
double f_square(double x) { return x * x; }
double df_square(double x, double) { return 2.0 * x; }
}  // namespace

Var Tape::unary(Var a, double (*f)(double), double (*df)(double, double)) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  std::size_t ai = a.idx, self = nodes_.size();
  return push(std::move(out), [ai, self, df](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    const Tensor& x = t.nodes_[ai].value;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

Var Tape::exp(Var a) { return unary(a, f_exp, df_exp); }
Var Tape::log(Var a) { return unary(a, f_log, df_log); }
Var Tape::tanh(Var a) { return unary(a, f_tanh, df_tanh); }
Var Tape::sigmoid(Var a) { return unary(a, f_sigmoid, df_sigmoid); }
Var Tape::relu(Var a) { return unary(a, f_relu, df_relu); }
Var Tape::softplus(Var a) { return unary(a, f_softplus, df_softplus); }
Var Tape::square(Var a) { return unary(a, f_square, df_square); }

Var Tape::clamp_min(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fmax(out[i], c);
  std::size_t ai = a.idx, self = nodes_.size();
  return push(std::move(out), [ai, self, c](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& x = t.nodes_[ai].value;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > c) ga[i] += g[i];
    }
  });
}

Var Tape::sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  std::size_t ai = a.idx, self = nodes_.size();
  return push(Tensor::scalar(s), [ai, self](Tape& t) {
    double g = t.nodes_[self].grad[0];
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var Tape::mean(Var a) {
  require(a.value().size() > 0, errc::shape_mismatch, "mean of an empty tensor");
  return mul_scalar(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var Tape::slice(Var a, std::size_t offset, std::vector<std::size_t> shape) {
  std::size_t count = shape_product(shape);
  require(offset + count <= a.value().size(), errc::shape_mismatch,
          "slice past the end of " + a.value().shape_str());
  std::vector<double> vals(a.value().values().begin() + static_cast<std::ptrdiff_t>(offset),
                           a.value().values().begin() +
                               static_cast<std::ptrdiff_t>(offset + count));
  std::size_t ai = a.idx, self = nodes_.size();
  return push(Tensor(std::move(shape), std::move(vals)), [ai, self, offset](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var Tape::concat(const std::vector<Var>& parts) {
  require(!parts.empty(), errc::shape_mismatch, "concat of zero tensors");
  std::size_t total = 0;
  for (const Var& p : parts) total += p.value().size();
  Tensor out({total});
  std::size_t off = 0;
  std::vector<std::size_t> idxs;
  idxs.reserve(parts.size());
  for (const Var& p : parts) {
    const auto& v = p.value().values();
    std::copy(v.begin(), v.end(), out.values().begin() + static_cast<std::ptrdiff_t>(off));
    off += v.size();
    idxs.push_back(p.idx);
  }
  std::size_t self = nodes_.size();
  return push(std::move(out), [idxs, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    std::size_t off2 = 0;
    for (std::size_t pi : idxs) {
      Tensor& gp = t.nodes_[pi].grad;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[off2 + i];
      off2 += gp.size();
    }
  });
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
  require(shape_product(shape) == a.value().size(), errc::shape_mismatch,
          "reshape to " + Tensor(shape).shape_str() + " from " + a.value().shape_str());
  Tensor out(std::move(shape), a.value().values());
  std::size_t ai = a.idx, self = nodes_.size();
  return push(std::move(out), [ai, self](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::matvec(Var w, Var x) {
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  require(wv.rank() == 2 && xv.size() == wv.dim(1), errc::shape_mismatch,
          "matvec: " + wv.shape_str() + " times " + xv.shape_str());
  std::size_t m = wv.dim(0), n = wv.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    const double* row = wv.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * xv[j];
    out[i] = s;
  }
  std::size_t wi = w.idx, xi = x.idx, self = nodes_.size();
  return push(std::move(out), [wi, xi, self, m, n](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& wv2 = t.nodes_[wi].value;
    const Tensor& xv2 = t.nodes_[xi].value;
    Tensor& gw = t.nodes_[wi].grad;
    Tensor& gx = t.nodes_[xi].grad;
    for (std::size_t i = 0; i < m; ++i) {
      double gi = g[i];
      const double* wrow = wv2.data() + i * n;
      double* gwrow = gw.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        gwrow[j] += gi * xv2[j];
        gx[j] += gi * wrow[j];
      }
    }
  });
}

Var Tape::add_rowwise(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.size() == av.dim(0), errc::shape_mismatch,
          "add_rowwise: " + av.shape_str() + " plus " + bv.shape_str());
  std::size_t rows = av.dim(0), cols = av.dim(1);
  Tensor out = av;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[r];
  }
  std::size_t ai = a.idx, bi = b.idx, self = nodes_.size();
  return push(std::move(out), [ai, bi, self, rows, cols](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    Tensor& ga = t.nodes_[ai].grad;
    Tensor& gb = t.nodes_[bi].grad;
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        double gv = g[r * cols + c];
        ga[r * cols + c] += gv;
        acc += gv;
      }
      gb[r] += acc;
    }
  });
}

Var Tape::conv1d(Var kernel, Var x, std::size_t stride, std::size_t pad) {
  const Tensor& kv = kernel.value();
  const Tensor& xv = x.value();
  require(kv.rank() == 3 && xv.rank() == 2 && xv.dim(0) == kv.dim(1), errc::shape_mismatch,
          "conv1d: kernel " + kv.shape_str() + " on input " + xv.shape_str());
  std::size_t co = kv.dim(0), ci = kv.dim(1), k = kv.dim(2), len = xv.dim(1);
  require(len + 2 * pad >= k, errc::shape_mismatch,
          "conv1d: input shorter than the kernel");
  require(stride > 0, errc::shape_mismatch, "conv1d: stride must be positive");
  std::size_t out_len = (len + 2 * pad - k) / stride + 1;
  Tensor out({co, out_len});
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t t = 0; t < out_len; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < ci; ++c) {
        const double* krow = kv.data() + (o * ci + c) * k;
        const double* xrow = xv.data() + c * len;
        for (std::size_t j = 0; j < k; ++j) {
          std::int64_t pos = static_cast<std::int64_t>(t * stride + j) -
                             static_cast<std::int64_t>(pad);
          if (pos >= 0 && pos < static_cast<std::int64_t>(len)) s += krow[j] * xrow[pos];
        }
      }
      out.at(o, t) = s;
    }
  }
  std::size_t ki = kernel.idx, xi = x.idx, self = nodes_.size();
  return push(std::move(out), [ki, xi, self, co, ci, k, len, out_len, stride, pad](Tape& t) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& kv2 = t.nodes_[ki].value;
    const Tensor& xv2 = t.nodes_[xi].value;
    Tensor& gk = t.nodes_[ki].grad;
    Tensor& gx = t.nodes_[xi].grad;
    for (std::size_t o = 0; o < co; ++o) {
      for (std::size_t tt = 0; tt < out_len; ++tt) {
        double gv = g[o * out_len + tt];
        if (gv == 0.0) continue;
        for (std::size_t c = 0; c < ci; ++c) {
          const double* krow = kv2.data() + (o * ci + c) * k;
          const double* xrow = xv2.data() + c * len;
          double* gkrow = gk.data() + (o * ci + c) * k;
          double* gxrow = gx.data() + c * len;
          for (std::size_t j = 0; j < k; ++j) {
            std::int64_t pos = static_cast<std::int64_t>(tt * stride + j) -
                               static_cast<std::int64_t>(pad);
            if (pos >= 0 && pos < static_cast<std::int64_t>(len)) {
              gkrow[j] += gv * xrow[pos];
              gxrow[pos] += gv * krow[j];
            }
          }
        }
      }
    }
  });
}

Var Tape::conv1d_transpose(Var kernel, Var y, std::size_t stride, std::size_t pad,
                           std::size_t output_padding) {
  const Tensor& kv = kernel.value();
  const Tensor& yv = y.value();
  require(kv.rank() == 3 && yv.rank() == 2 && yv.dim(0) == kv.dim(0), errc::shape_mismatch,
          "conv1d_transpose: kernel " + kv.shape_str() + " on input " + yv.shape_str());
  require(stride > 0, errc::shape_mismatch, "conv1d_transpose: stride must be positive");
  std::size_t co = kv.dim(0), ci = kv.dim(1), k = kv.dim(2), len = yv.dim(1);
  std::int64_t out_len_i = static_cast<std::int64_t>((len - 1) * stride + k) -
                           2 * static_cast<std::int64_t>(pad) +
                           static_cast<std::int64_t>(output_padding);
  require(out_len_i >= 1, errc::shape_mismatch,
          "conv1d_transpose: output length would be non-positive");
  std::size_t out_len = static_cast<std::size_t>(out_len_i);
  Tensor out({ci, out_len});
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t j = 0; j < k; ++j) {
      std::int64_t pos =
          static_cast<std::int64_t>(t * stride + j) - static_cast<std::int64_t>(pad);
      if (pos < 0 || pos >= out_len_i) continue;
      for (std::size_t o = 0; o < co; ++o) {
        double yval = yv.at(o, t);
        const double* krow = kv.data() + o * ci * k;
        for (std::size_t c = 0; c < ci; ++c) {
          out.at(c, static_cast<std::size_t>(pos)) += yval * krow[c * k + j];
        }
      }
    }
  }
  std::size_t ki = kernel.idx, yi = y.idx, self = nodes_.size();
  return push(std::move(out),
              [ki, yi, self, co, ci, k, len, out_len_i, stride, pad](Tape& t) {
                const Tensor& g = t.nodes_[self].grad;
                const Tensor& kv2 = t.nodes_[ki].value;
                const Tensor& yv2 = t.nodes_[yi].value;
                Tensor& gk = t.nodes_[ki].grad;
                Tensor& gy = t.nodes_[yi].grad;
                std::size_t out_len = static_cast<std::size_t>(out_len_i);
                for (std::size_t tt = 0; tt < len; ++tt) {
                  for (std::size_t j = 0; j < k; ++j) {
                    std::int64_t pos = static_cast<std::int64_t>(tt * stride + j) -
                                       static_cast<std::int64_t>(pad);
                    if (pos < 0 || pos >= out_len_i) continue;
                    for (std::size_t o = 0; o < co; ++o) {
                      double yval = yv2.at(o, tt);
                      double gyacc = 0.0;
                      for (std::size_t c = 0; c < ci; ++c) {
                        double gout = g[c * out_len + static_cast<std::size_t>(pos)];
                        gk[(o * ci + c) * k + j] += yval * gout;
                        gyacc += kv2[(o * ci + c) * k + j] * gout;
                      }
                      gy[o * len + tt] += gyacc;
                    }
                  }
                }
              });
}

void Tape::backward(Var root) {
  require(grad_enabled_, errc::shape_mismatch, "backward on an inference-only tape");
  require(root.tape == this && root.value().size() == 1, errc::shape_mismatch,
          "backward root must be a scalar on this tape");
  for (std::size_t i = 0; i <= root.idx; ++i) nodes_[i].grad.fill(0.0);
  nodes_[root.idx].grad[0] = 1.0;
  for (std::size_t i = root.idx + 1; i-- > 0;) {
    if (nodes_[i].back) nodes_[i].back(*this);
  }
  for (std::size_t i = 0; i <= root.idx; ++i) {
    if (nodes_[i].param == nullptr) continue;
    Tensor& pg = nodes_[i].param->grad;
    const Tensor& ng = nodes_[i].grad;
    for (std::size_t j = 0; j < pg.size(); ++j) pg[j] += ng[j];
  }
}

}  // namespace netcast
