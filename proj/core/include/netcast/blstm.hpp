#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "netcast/autodiff.hpp"
#include "netcast/checkpoint.hpp"
#include "netcast/rng.hpp"
#include "netcast/tensor.hpp"

namespace netcast::blstm {

/// Gaussian posterior over one weight tensor: theta ~ N(mu, softplus(rho)^2)
/// elementwise, against a zero-mean prior of standard deviation prior_std.
struct BayesianWeight {
  Parameter mu;
  Parameter rho;

  BayesianWeight() = default;
  BayesianWeight(Tensor mu_init, double rho_init, const std::string& name);
};

struct Config {
  std::size_t input_dim = 40;  // encoder latent + kPF sample, concatenated
  std::size_t hidden_dim = 16;
  std::size_t horizon = 96;
  std::size_t mc_samples = 30;  // inference weight draws
  double kl_weight = 0.0;       // 0 -> 1 / batches-per-epoch
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double prior_std = 1.0;
};

/// One training example: conditioning vector (fed at every unrolled step)
/// and the target track over the horizon.
struct LatentSample {
  Tensor condition;  // [input_dim]
  Tensor target;     // [horizon]
  std::int64_t target_start_time = 0;
};

/// Standard-normal perturbations, one per weight tensor; frozen noise makes
/// the reparameterized path deterministic and finite-difference checkable.
struct NoiseDraw {
  Tensor wx, wh, b, head_w, head_b;
};

/// Sampled concrete weights as tape nodes (gradients flow to mu and rho).
struct WeightDraw {
  Var wx, wh, b, head_w, head_b;
};

struct ForecastDistribution {
  std::vector<std::int64_t> timestamps;  // filled once anchored to a site
  std::vector<double> mu_pred;
  std::vector<double> sigma_pred;  // strictly positive
  std::size_t mc_samples_used = 0;
};

class Model {
 public:
  Config config;
  BayesianWeight wx;      // [4H, input_dim]
  BayesianWeight wh;      // [4H, H]
  BayesianWeight b;       // [4H]
  BayesianWeight head_w;  // [2, H] per-step (mu, ln sigma^2) head
  BayesianWeight head_b;  // [2]
  std::vector<double> loss_trace;

  static Model init(const Config& cfg, Rng& rng);

  std::vector<Parameter*> parameters();
  std::vector<BayesianWeight*> weights();
  std::size_t scalar_weight_count() const;  // mu and rho both counted

  NoiseDraw draw_noise(Rng& rng) const;
  /// theta = mu + softplus(rho) * eps, built on the tape.
  WeightDraw sample_weights(Tape& tape, const NoiseDraw& eps) const;

  /// Unroll the horizon with the given weights; returns per-step
  /// (mu, ln sigma^2) pairs of Vars.
  std::vector<std::pair<Var, Var>> unroll(Tape& tape, const WeightDraw& w,
                                          Var condition) const;
};

/// Closed-form KL(q || prior) summed over every scalar weight.
double kl_gaussian(const Model& model);
/// Tape version for training; same value, gradients attached.
Var kl_gaussian_graph(Tape& tape, const Model& model);

/// Sum over steps of ln sigma + (y - mu)^2 / (2 sigma^2), sigma floored at
/// 1e-6 in the caller's units.
double gaussian_nll(const std::vector<double>& mu, const std::vector<double>& sigma,
                    const std::vector<double>& y_obs);

/// Mean per-sample NLL of one weight draw plus kl_weight * KL.
double free_energy(const Model& model, const std::vector<LatentSample>& batch,
                   double kl_weight, const NoiseDraw& eps);

/// Called at the start of every epoch so the caller can rebuild the
/// conditioning vectors in place (e.g. redraw the stochastic half of each
/// condition); targets must be left untouched.
using ConditionRefresh = std::function<void(std::size_t epoch, std::vector<LatentSample>& data)>;

Model train(const std::vector<LatentSample>& dataset, const Config& cfg, std::uint64_t seed,
            const ConditionRefresh& refresh = {});

/// One forecast track per weight draw; row i is member i's mu over the
/// horizon and sigma over the horizon ([mc, horizon] each).
std::pair<Tensor, Tensor> forecast_members(const Model& model, const Tensor& conditions,
                                           Rng& rng);

/// Pool member tracks into one Gaussian per step: mean of member means;
/// variance = mean member variance plus the population variance of the
/// member means (aleatoric + epistemic).
ForecastDistribution mixture_from_members(const Tensor& mus, const Tensor& sigmas);

/// Monte-Carlo forecast: conditions is [mc, input_dim] (one kPF draw per
/// member already concatenated); moments pooled by the mixture rule
/// sigma^2 = mean(sigma_i^2) + var(mu_i).
ForecastDistribution forecast(const Model& model, const Tensor& conditions, Rng& rng);

/// mu -/+ z * sigma at a central coverage level of 50, 68, 95 or 99
/// percent; wide_95 selects the rounded z = 2 convention at level 95.
std::pair<std::vector<double>, std::vector<double>> interval(
    const ForecastDistribution& fc, int level_pct, bool wide_95 = false);

void save_blstm(CheckpointWriter& writer, const Model& model);
Model load_blstm(const CheckpointReader& reader);

}  // namespace netcast::blstm
