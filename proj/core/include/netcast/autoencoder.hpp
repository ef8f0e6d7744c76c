#pragma once

#include <cstdint>
#include <vector>

#include "netcast/checkpoint.hpp"
#include "netcast/data.hpp"
#include "netcast/tensor.hpp"

namespace netcast {

struct ConvSpec {
  std::size_t channels = 0;
  std::size_t kernel = 5;
  std::size_t stride = 2;
};

struct AeConfig {
  std::size_t latent_dim = 20;
  /// Encoder conv stack (ReLU between layers, then dense to latent_dim).
  /// Empty means "choose the default stack for the window length". The
  /// decoder always mirrors with transposed convolutions.
  std::vector<ConvSpec> encoder;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
};

/// Default stack: three kernel-5 conv layers, 16 -> 32 -> 16 channels,
/// stride 2 for short (sub-day) windows and 4 for multi-day ones, keeping
/// the flattened feature map - and the weight budget - small at both
/// window lengths.
std::vector<ConvSpec> default_encoder_stack(std::size_t t_win);

class TrainedAe {
 public:
  AeConfig config;               // with the encoder stack resolved
  std::size_t in_channels = 0;
  std::size_t t_win = 0;
  std::vector<std::size_t> layer_lengths;   // series length after each conv
  std::vector<std::size_t> output_padding;  // per mirrored decoder layer

  std::vector<Parameter> enc_kernels, enc_biases;
  Parameter enc_w, enc_b;  // dense flatten -> latent
  Parameter dec_w, dec_b;  // dense latent -> flatten
  std::vector<Parameter> dec_kernels, dec_biases;

  NormStats stats;                 // normalization the model was trained in
  std::vector<double> loss_trace;  // per-epoch mean reconstruction MSE
  /// True when the 5-epoch-averaged loss ever increased.
  bool divergent = false;

  /// Conv padding used throughout (kernel 5 -> pad 2 keeps lengths tidy).
  static constexpr std::size_t kPad = 2;

  Tensor encode(const Tensor& window) const;  // [C, t_win] -> [latent_dim]
  Tensor decode(const Tensor& z) const;       // [latent_dim] -> [C, t_win]

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t scalar_weight_count() const;
};

/// Minimize mean squared reconstruction error over the dataset inputs with
/// mini-batch Adam; deterministic given the seed.
TrainedAe train_ae(const WindowedDataset& ds, const AeConfig& cfg, std::uint64_t seed,
                   NormStats stats = {});

struct CorrelationResult {
  Tensor corr;  // [latent_dim, n_channels] Pearson coefficients
  /// Coordinates/channels with zero variance across samples; their
  /// correlations are reported as 0.
  std::vector<char> degenerate_latent;
  std::vector<char> degenerate_channel;
};

/// Pearson correlation between each latent coordinate and each input
/// channel's window mean, across the dataset's samples.
CorrelationResult latent_correlation(const TrainedAe& ae, const WindowedDataset& ds);

/// Checkpoint round-trip under the `ae.` section prefix.
void save_ae(CheckpointWriter& writer, const TrainedAe& ae);
TrainedAe load_ae(const CheckpointReader& reader);

}  // namespace netcast
