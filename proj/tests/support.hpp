#pragma once

// Reference implementations used to cross-check the library. Everything
// here is written with plain loops, Gauss-Jordan elimination, and direct
// quadrature so it shares no code with the library paths under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "netcast/autodiff.hpp"
#include "netcast/rng.hpp"
#include "netcast/tensor.hpp"

namespace testref {

using Mat = std::vector<std::vector<double>>;

inline Mat mat(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  std::size_t n = a.size(), k = b.size(), m = b[0].size();
  Mat out = mat(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
      out[i][j] = s;
    }
  return out;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Mat inverse(Mat a) {
  std::size_t n = a.size();
  Mat inv = mat(n, n);
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    if (std::fabs(a[pivot][col]) < 1e-300) throw std::runtime_error("singular matrix");
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    double scale = 1.0 / a[col][col];
    for (std::size_t j = 0; j < n; ++j) {
      a[col][j] *= scale;
      inv[col][j] *= scale;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

inline double kernel(const std::vector<double>& x, const std::vector<double>& y, bool squared) {
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    ss += d * d;
  }
  return std::exp(-(squared ? ss : std::sqrt(ss)) / 2.0);
}

/// Naive latent sampler: Gram matrices by double loop, regularized inverse
/// by Gauss-Jordan, per-column top-gamma selection (ties to the lower
/// index), L1-normalized recombination of the training rows.
inline Mat kpf_reference(const Mat& x_e, const Mat& z, const Mat& w, std::size_t gamma,
                         bool squared) {
  std::size_t n = x_e.size(), d = x_e[0].size(), m = w.size();
  Mat k = mat(n, n), reg = mat(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      k[i][j] = kernel(x_e[i], x_e[j], squared);
      reg[i][j] = k[i][j] + (i == j ? static_cast<double>(n) : 0.0);
    }
  Mat k_inv = inverse(reg);
  Mat l = mat(n, n), v = mat(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) l[i][j] = kernel(z[i], z[j], squared);
    for (std::size_t j = 0; j < m; ++j) v[i][j] = kernel(z[i], w[j], squared);
  }
  Mat s = matmul(l, matmul(k_inv, v));

  Mat out = mat(m, d);
  std::size_t take = std::min(gamma, n);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return s[a][j] > s[b][j]; });
    double norm = 0.0;
    for (std::size_t t = 0; t < take; ++t) norm += std::fabs(s[idx[t]][j]);
    for (std::size_t t = 0; t < take; ++t) {
      double weight = s[idx[t]][j] / norm;
      for (std::size_t c = 0; c < d; ++c) out[j][c] += x_e[idx[t]][c] * weight;
    }
  }
  return out;
}

inline double norm_cdf(double x, double mu, double sigma) {
  return 0.5 * std::erfc(-(x - mu) / (sigma * std::sqrt(2.0)));
}

/// Trapezoid CRPS with the integral split at the observation, so the step
/// discontinuity never crosses a panel.
inline double crps_trapezoid(double mu, double sigma, double y, std::size_t panels) {
  double lo = mu - 12.0 * sigma, hi = mu + 12.0 * sigma;
  auto seg = [&](double a, double b, const std::function<double(double)>& g) {
    if (b <= a) return 0.0;
    double h = (b - a) / static_cast<double>(panels);
    double sum = 0.5 * (g(a) + g(b));
    for (std::size_t i = 1; i < panels; ++i) sum += g(a + h * static_cast<double>(i));
    return sum * h;
  };
  auto f2 = [&](double x) {
    double f = norm_cdf(x, mu, sigma);
    return f * f;
  };
  auto c2 = [&](double x) {
    double f = 1.0 - norm_cdf(x, mu, sigma);
    return f * f;
  };
  double yc = std::clamp(y, lo, hi);
  double total = seg(lo, yc, f2) + seg(yc, hi, c2);
  if (y > hi) total += y - hi;
  if (y < lo) total += lo - y;
  return total;
}

/// Max relative error between analytic gradients and central differences,
/// over every coordinate of every input. The graph is scalarized through a
/// fixed random weighting so sign errors cannot cancel.
inline double max_rel_grad_error(
    const std::function<netcast::Var(netcast::Tape&, const std::vector<netcast::Var>&)>& fn,
    const std::vector<netcast::Tensor>& inputs, std::uint64_t seed, double h = 1e-6) {
  using netcast::Parameter;
  using netcast::Tape;
  using netcast::Tensor;
  using netcast::Var;

  std::vector<std::size_t> out_shape;
  {
    Tape probe(false);
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& x : inputs) vars.push_back(probe.constant(x));
    out_shape = fn(probe, vars).value().shape();
  }
  netcast::Rng rng(seed);
  Tensor weights = netcast::gaussian(rng, out_shape);

  auto value_of = [&](const std::vector<Tensor>& xs) {
    Tape t(false);
    std::vector<Var> vars;
    vars.reserve(xs.size());
    for (const Tensor& x : xs) vars.push_back(t.constant(x));
    return t.sum(t.mul(fn(t, vars), t.constant(weights))).scalar();
  };

  std::vector<Parameter> params;
  params.reserve(inputs.size());
  for (const Tensor& x : inputs) params.emplace_back(x, "in");
  Tape tape(true);
  std::vector<Var> leaves;
  for (Parameter& p : params) leaves.push_back(tape.leaf(p));
  Var root = tape.sum(tape.mul(fn(tape, leaves), tape.constant(weights)));
  tape.backward(root);

  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].value.size(); ++k) {
      std::vector<Tensor> bumped = inputs;
      double step = h * std::max(1.0, std::fabs(inputs[i][k]));
      bumped[i][k] = inputs[i][k] + step;
      double up = value_of(bumped);
      bumped[i][k] = inputs[i][k] - step;
      double down = value_of(bumped);
      double numeric = (up - down) / (2.0 * step);
      double analytic = params[i].grad[k];
      double rel = std::fabs(numeric - analytic) /
                   std::max({1.0, std::fabs(numeric), std::fabs(analytic)});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

/// Direct cross-correlation conv1d: out[o][t] = sum_{c,u} k[o][c][u] *
/// x[c][t*stride + u - pad].
inline netcast::Tensor conv1d_ref(const netcast::Tensor& kernel, const netcast::Tensor& x,
                                  std::size_t stride, std::size_t pad) {
  std::size_t co = kernel.dim(0), ci = kernel.dim(1), kw = kernel.dim(2);
  std::size_t t_in = x.dim(1);
  std::size_t t_out = (t_in + 2 * pad - kw) / stride + 1;
  netcast::Tensor out({co, t_out});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t t = 0; t < t_out; ++t) {
      double s = 0.0;
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t u = 0; u < kw; ++u) {
          std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride + u) -
                               static_cast<std::ptrdiff_t>(pad);
          if (src < 0 || src >= static_cast<std::ptrdiff_t>(t_in)) continue;
          s += kernel.at(o, c, u) * x.at(c, static_cast<std::size_t>(src));
        }
      out.at(o, t) = s;
    }
  return out;
}

}  // namespace testref
