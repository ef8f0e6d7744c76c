#include "netcast/kpf.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "netcast/errors.hpp"

namespace netcast::kpf {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;

ConstMap map2d(const Tensor& t) { return ConstMap(t.data(), t.dim(0), t.dim(1)); }

/// Pairwise kernel matrix between rows of a [na, dim] and b [nb, dim].
Tensor kernel_matrix(const Tensor& a, const Tensor& b, bool squared) {
  std::size_t na = a.dim(0), nb = b.dim(0), dim = a.dim(1);
  Tensor out({na, nb});
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      out.at(i, j) = gaussian_kernel(a.data() + i * dim, b.data() + j * dim, dim, squared);
    }
  }
  return out;
}

}  // namespace

double gaussian_kernel(const double* x, const double* y, std::size_t dim, bool squared) {
  double ss = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double d = x[i] - y[i];
    ss += d * d;
  }
  return std::exp(-(squared ? ss : std::sqrt(ss)) / 2.0);
}

double gaussian_kernel(const std::vector<double>& x, const std::vector<double>& y,
                       bool squared) {
  require(x.size() == y.size(), errc::dim_mismatch,
          "kernel arguments of length " + std::to_string(x.size()) + " and " +
              std::to_string(y.size()));
  return gaussian_kernel(x.data(), y.data(), x.size(), squared);
}

Model fit(const Tensor& encoded, const Options& opts) {
  require(encoded.rank() == 2 && encoded.dim(0) >= 1 && encoded.dim(1) >= 1,
          errc::shape_mismatch, "fit expects a non-empty [n, d] embedding matrix");
  std::size_t n = encoded.dim(0);
  require(opts.gamma >= 1 && opts.gamma <= n, errc::bad_gamma,
          "gamma must lie in [1, n(=" + std::to_string(n) + ")]");

  Model model;
  model.x_e = encoded;
  model.gamma = opts.gamma;
  model.prior_dim = opts.prior_dim == 0 ? encoded.dim(1) : opts.prior_dim;
  model.squared_kernel = opts.squared_kernel;
  model.k = kernel_matrix(encoded, encoded, opts.squared_kernel);

  Eigen::MatrixXd reg = map2d(model.k);
  reg.diagonal().array() += static_cast<double>(n);
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  require(llt.info() == Eigen::Success, errc::singular_system,
          "Cholesky factorization of K + nI failed");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));

  model.k_inv = Tensor({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      model.k_inv.at(i, j) = inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return model;
}

bool SampleBatch::any_negative() const {
  return std::any_of(negative_weight.begin(), negative_weight.end(),
                     [](char f) { return f != 0; });
}

SampleBatch sample_given(const Model& model, const Tensor& z, const Tensor& w) {
  std::size_t n = model.n(), d = model.dim();
  require(z.rank() == 2 && z.dim(0) == n && z.dim(1) == model.prior_dim,
          errc::shape_mismatch, "z must be [n, prior_dim]");
  require(w.rank() == 2 && w.dim(1) == model.prior_dim, errc::shape_mismatch,
          "w must be [m, prior_dim]");
  std::size_t m = w.dim(0);

  Tensor l = kernel_matrix(z, z, model.squared_kernel);
  Tensor v = kernel_matrix(z, w, model.squared_kernel);
  RowMatrix s = map2d(l) * map2d(model.k_inv) * map2d(v);  // [n, m]

  SampleBatch batch;
  batch.samples = Tensor({m, d});
  batch.negative_weight.assign(m, 0);

  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < m; ++j) {
    std::iota(order.begin(), order.end(), 0);
    // Descending by weight; stable sort keeps the lower index first on ties.
    std::stable_sort(order.begin(), order.end(), [&s, j](std::size_t a, std::size_t b) {
      return s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) >
             s(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
    });
    double l1 = 0.0;
    for (std::size_t r = 0; r < model.gamma; ++r) {
      double weight = s(static_cast<Eigen::Index>(order[r]), static_cast<Eigen::Index>(j));
      l1 += std::fabs(weight);
      if (weight < 0.0) batch.negative_weight[j] = 1;
    }
    require(l1 > 0.0, errc::singular_system,
            "selected recombination weights are all zero");
    for (std::size_t r = 0; r < model.gamma; ++r) {
      std::size_t i = order[r];
      double coeff = s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / l1;
      const double* row = model.x_e.data() + i * d;
      double* out = batch.samples.data() + j * d;
      for (std::size_t c = 0; c < d; ++c) out[c] += coeff * row[c];
    }
  }
  return batch;
}

SampleBatch sample(const Model& model, std::size_t m, Rng& rng) {
  require(m >= 1, errc::out_of_range, "sample count must be positive");
  Tensor z = gaussian(rng, {model.n(), model.prior_dim});
  Tensor w = gaussian(rng, {m, model.prior_dim});
  return sample_given(model, z, w);
}

LatentSummary latent_distribution(const Model& model, std::size_t m, Rng& rng) {
  require(m >= 2, errc::out_of_range, "a distribution summary needs at least two samples");
  SampleBatch batch = sample(model, m, rng);
  std::size_t d = model.dim();
  LatentSummary summary;
  summary.negative_weight = batch.negative_weight;
  summary.sorted_samples = Tensor({d, m});
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t j = 0; j < m; ++j) {
      summary.sorted_samples.at(c, j) = batch.samples.at(j, c);
    }
    double* row = summary.sorted_samples.data() + c * m;
    std::sort(row, row + m);
  }
  return summary;
}

}  // namespace netcast::kpf
