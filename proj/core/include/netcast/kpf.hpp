#pragma once

#include <cstddef>
#include <vector>

#include "netcast/rng.hpp"
#include "netcast/tensor.hpp"

namespace netcast::kpf {

/// k(x, y) = exp(-||x - y|| / 2) with the Euclidean norm unsquared; the
/// squared variant (classic RBF) is available for sensitivity runs.
double gaussian_kernel(const double* x, const double* y, std::size_t dim,
                       bool squared = false);
double gaussian_kernel(const std::vector<double>& x, const std::vector<double>& y,
                       bool squared = false);

struct Options {
  std::size_t gamma = 10;
  /// Dimension of the Gaussian prior draws z and w; 0 means "match the
  /// latent dimension of the fitted embeddings".
  std::size_t prior_dim = 0;
  bool squared_kernel = false;
};

/// Kernel structures over the n encoded training points: Gram matrix K,
/// its regularized inverse (K + nI)^-1, and the sampling hyperparameters.
struct Model {
  Tensor x_e;    // [n, d] encoded training samples
  Tensor k;      // [n, n] Gram matrix, unit diagonal
  Tensor k_inv;  // [n, n] = (K + nI)^-1
  std::size_t gamma = 1;
  std::size_t prior_dim = 1;
  bool squared_kernel = false;

  std::size_t n() const { return x_e.dim(0); }
  std::size_t dim() const { return x_e.dim(1); }
};

/// Build the kernel structures. The inverse goes through a Cholesky
/// factorization of the symmetric positive definite K + nI.
Model fit(const Tensor& encoded, const Options& opts);

struct SampleBatch {
  Tensor samples;  // [m, d]
  /// Per output row: true when any selected recombination weight was
  /// negative (the L1 normalization keeps the sign).
  std::vector<char> negative_weight;

  bool any_negative() const;
};

/// Core sampler with the prior draws injected: z [n, prior_dim] and
/// w [m, prior_dim]. Each output row j is the L1-normalized recombination
/// of the gamma training embeddings with the largest weights s[:, j],
/// where s = L * K_inv * V.
SampleBatch sample_given(const Model& model, const Tensor& z, const Tensor& w);

/// Draw z and w from the standard Gaussian prior, then recombine.
SampleBatch sample(const Model& model, std::size_t m, Rng& rng);

struct LatentSummary {
  Tensor sorted_samples;  // [d, m]; each coordinate's draws, ascending
  std::vector<char> negative_weight;
};

/// Empirical per-coordinate distribution of m generated latent samples.
LatentSummary latent_distribution(const Model& model, std::size_t m, Rng& rng);

}  // namespace netcast::kpf
