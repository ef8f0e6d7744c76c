#include "netcast/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netcast/autodiff.hpp"
#include "netcast/layers.hpp"
#include "netcast/optim.hpp"
#include "netcast/rng.hpp"

namespace netcast {

namespace {

std::size_t conv_out_len(std::size_t t, std::size_t k, std::size_t s, std::size_t p) {
  require(t + 2 * p >= k, errc::shape_mismatch, "window too short for the conv stack");
  return (t + 2 * p - k) / s + 1;
}

/// Encoder (and, reversed, decoder) channel counts: c[0] = input channels,
/// c[i] = spec[i-1].channels.
std::vector<std::size_t> channel_ladder(std::size_t in_channels,
                                        const std::vector<ConvSpec>& spec) {
  std::vector<std::size_t> c{in_channels};
  for (const ConvSpec& l : spec) c.push_back(l.channels);
  return c;
}

/// Shared forward graph. Works for training (grad tape) and inference
/// (no-grad tape); leaf() only binds gradients when the tape records them,
/// so the const_cast below never leads to mutation on the inference path.
Var encode_graph(Tape& t, const TrainedAe& cae, Var x) {
  auto& ae = const_cast<TrainedAe&>(cae);
  Var h = x;
  for (std::size_t i = 0; i < ae.enc_kernels.size(); ++i) {
    h = t.relu(conv1d_bias(t, t.leaf(ae.enc_kernels[i]), t.leaf(ae.enc_biases[i]), h,
                           ae.config.encoder[i].stride, TrainedAe::kPad));
  }
  return dense(t, t.leaf(ae.enc_w), t.leaf(ae.enc_b), h);
}

Var decode_graph(Tape& t, const TrainedAe& cae, Var z) {
  auto& ae = const_cast<TrainedAe&>(cae);
  std::size_t layers = ae.dec_kernels.size();
  std::size_t deep_len = ae.layer_lengths.back();
  std::size_t deep_ch = ae.config.encoder.back().channels;
  Var h = t.relu(dense(t, t.leaf(ae.dec_w), t.leaf(ae.dec_b), z));
  h = t.reshape(h, {deep_ch, deep_len});
  for (std::size_t j = 0; j < layers; ++j) {
    const ConvSpec& mirrored = ae.config.encoder[layers - 1 - j];
    h = conv1d_transpose_bias(t, t.leaf(ae.dec_kernels[j]), t.leaf(ae.dec_biases[j]), h,
                              mirrored.stride, TrainedAe::kPad, ae.output_padding[j]);
    if (j + 1 < layers) h = t.relu(h);
  }
  return h;
}

TrainedAe build_ae(std::size_t in_channels, std::size_t t_win, AeConfig cfg, Rng& rng) {
  if (cfg.encoder.empty()) cfg.encoder = default_encoder_stack(t_win);
  require(cfg.latent_dim >= 1, errc::out_of_range, "latent_dim must be positive");

  TrainedAe ae;
  ae.config = std::move(cfg);
  ae.in_channels = in_channels;
  ae.t_win = t_win;

  std::vector<std::size_t> c = channel_ladder(in_channels, ae.config.encoder);
  ae.layer_lengths.push_back(t_win);
  for (const ConvSpec& l : ae.config.encoder) {
    ae.layer_lengths.push_back(
        conv_out_len(ae.layer_lengths.back(), l.kernel, l.stride, TrainedAe::kPad));
  }

  std::size_t layers = ae.config.encoder.size();
  for (std::size_t i = 0; i < layers; ++i) {
    const ConvSpec& l = ae.config.encoder[i];
    std::size_t fan_in = c[i] * l.kernel, fan_out = c[i + 1] * l.kernel;
    ae.enc_kernels.emplace_back(glorot_uniform(rng, {c[i + 1], c[i], l.kernel}, fan_in,
                                               fan_out),
                                "enc." + std::to_string(i) + ".kernel");
    ae.enc_biases.emplace_back(Tensor({c[i + 1]}), "enc." + std::to_string(i) + ".bias");
  }
  std::size_t flat = c.back() * ae.layer_lengths.back();
  ae.enc_w = Parameter(glorot_uniform(rng, {ae.config.latent_dim, flat}, flat,
                                      ae.config.latent_dim),
                       "enc_dense.w");
  ae.enc_b = Parameter(Tensor({ae.config.latent_dim}), "enc_dense.b");
  ae.dec_w = Parameter(glorot_uniform(rng, {flat, ae.config.latent_dim},
                                      ae.config.latent_dim, flat),
                       "dec_dense.w");
  ae.dec_b = Parameter(Tensor({flat}), "dec_dense.b");

  for (std::size_t j = 0; j < layers; ++j) {
    const ConvSpec& l = ae.config.encoder[layers - 1 - j];
    std::size_t ci = c[layers - j], co = c[layers - 1 - j];
    std::size_t fan_in = ci * l.kernel, fan_out = co * l.kernel;
    ae.dec_kernels.emplace_back(glorot_uniform(rng, {ci, co, l.kernel}, fan_in, fan_out),
                                "dec." + std::to_string(j) + ".kernel");
    ae.dec_biases.emplace_back(Tensor({co}), "dec." + std::to_string(j) + ".bias");
    // Transposed stride arithmetic rarely lands exactly on the mirrored
    // length; output_padding supplies the missing trailing samples.
    std::size_t t_in = ae.layer_lengths[layers - j];
    std::size_t t_out = ae.layer_lengths[layers - 1 - j];
    std::size_t base = (t_in - 1) * l.stride + l.kernel - 2 * TrainedAe::kPad;
    require(base <= t_out, errc::shape_mismatch,
            "decoder layer overshoots the mirrored length");
    ae.output_padding.push_back(t_out - base);
  }
  return ae;
}

}  // namespace

std::vector<ConvSpec> default_encoder_stack(std::size_t t_win) {
  std::size_t stride = t_win >= 240 ? 4 : 2;
  return {{16, 5, stride}, {32, 5, stride}, {16, 5, stride}};
}

Tensor TrainedAe::encode(const Tensor& window) const {
  require(window.rank() == 2 && window.dim(0) == in_channels && window.dim(1) == t_win,
          errc::shape_mismatch,
          "encode expects [" + std::to_string(in_channels) + ", " + std::to_string(t_win) +
              "], got " + window.shape_str());
  Tape t(false);
  return encode_graph(t, *this, t.constant(window)).value();
}

Tensor TrainedAe::decode(const Tensor& z) const {
  require(z.size() == config.latent_dim, errc::shape_mismatch,
          "decode expects a latent vector of length " +
              std::to_string(config.latent_dim));
  Tape t(false);
  return decode_graph(t, *this, t.constant(z)).value();
}

std::vector<Parameter*> TrainedAe::parameters() {
  std::vector<Parameter*> out;
  for (Parameter& p : enc_kernels) out.push_back(&p);
  for (Parameter& p : enc_biases) out.push_back(&p);
  out.push_back(&enc_w);
  out.push_back(&enc_b);
  out.push_back(&dec_w);
  out.push_back(&dec_b);
  for (Parameter& p : dec_kernels) out.push_back(&p);
  for (Parameter& p : dec_biases) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> TrainedAe::parameters() const {
  auto mutable_list = const_cast<TrainedAe*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

std::size_t TrainedAe::scalar_weight_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->size();
  return n;
}

TrainedAe train_ae(const WindowedDataset& ds, const AeConfig& cfg, std::uint64_t seed,
                   NormStats stats) {
  require(!ds.samples.empty(), errc::empty_dataset, "cannot train on an empty dataset");
  Rng root(seed);
  Rng init_rng = root.stream(0);
  TrainedAe ae = build_ae(ds.input_channels.size(), ds.t_win, cfg, init_rng);
  ae.stats = std::move(stats);

  Adam opt(ae.parameters(), {.lr = ae.config.lr});
  std::vector<std::size_t> order(ds.samples.size());
  std::iota(order.begin(), order.end(), 0);

  Tape tape(true);
  for (std::size_t epoch = 0; epoch < ae.config.epochs; ++epoch) {
    Rng shuffle_rng = root.stream(1).stream(epoch);
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += ae.config.batch_size) {
      std::size_t bs = std::min(ae.config.batch_size, order.size() - b);
      for (std::size_t s = 0; s < bs; ++s) {
        const Tensor& x = ds.samples[order[b + s]].input;
        tape.clear();
        Var input = tape.constant(x);
        Var recon = decode_graph(tape, ae, encode_graph(tape, ae, input));
        Var mse = tape.mean(tape.square(tape.sub(recon, input)));
        epoch_loss += mse.scalar();
        tape.backward(tape.mul_scalar(mse, 1.0 / static_cast<double>(bs)));
      }
      opt.step();
    }
    epoch_loss /= static_cast<double>(order.size());
    require(std::isfinite(epoch_loss), errc::divergent_training,
            "reconstruction loss became non-finite at epoch " + std::to_string(epoch));
    ae.loss_trace.push_back(epoch_loss);
  }

  // Flag divergence when the 5-epoch averaged loss ever rises.
  double prev_window = 1e300;
  for (std::size_t w = 0; w + 5 <= ae.loss_trace.size(); w += 5) {
    double avg = 0.0;
    for (std::size_t i = w; i < w + 5; ++i) avg += ae.loss_trace[i];
    avg /= 5.0;
    if (avg > prev_window) ae.divergent = true;
    prev_window = avg;
  }
  return ae;
}

CorrelationResult latent_correlation(const TrainedAe& ae, const WindowedDataset& ds) {
  std::size_t n = ds.samples.size();
  require(n >= 3, errc::out_of_range, "latent correlation needs at least 3 samples");
  std::size_t d = ae.config.latent_dim;
  std::size_t n_ch = ds.input_channels.size();

  Tensor lat({n, d});
  Tensor chan_mean({n, n_ch});
  for (std::size_t s = 0; s < n; ++s) {
    Tensor z = ae.encode(ds.samples[s].input);
    for (std::size_t j = 0; j < d; ++j) lat.at(s, j) = z[j];
    for (std::size_t c = 0; c < n_ch; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < ds.t_win; ++t) acc += ds.samples[s].input.at(c, t);
      chan_mean.at(s, c) = acc / static_cast<double>(ds.t_win);
    }
  }

  auto column_stats = [n](const Tensor& m, std::size_t col, double& mean, double& sd) {
    mean = 0.0;
    for (std::size_t s = 0; s < n; ++s) mean += m.at(s, col);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      double dv = m.at(s, col) - mean;
      ss += dv * dv;
    }
    sd = std::sqrt(ss / static_cast<double>(n));
  };

  CorrelationResult result;
  result.corr = Tensor({d, n_ch});
  result.degenerate_latent.assign(d, 0);
  result.degenerate_channel.assign(n_ch, 0);

  std::vector<double> lat_mean(d), lat_sd(d), ch_mean(n_ch), ch_sd(n_ch);
  for (std::size_t j = 0; j < d; ++j) {
    column_stats(lat, j, lat_mean[j], lat_sd[j]);
    if (lat_sd[j] < 1e-12) result.degenerate_latent[j] = 1;
  }
  for (std::size_t c = 0; c < n_ch; ++c) {
    column_stats(chan_mean, c, ch_mean[c], ch_sd[c]);
    if (ch_sd[c] < 1e-12) result.degenerate_channel[c] = 1;
  }
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < n_ch; ++c) {
      if (result.degenerate_latent[j] || result.degenerate_channel[c]) continue;
      double cov = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        cov += (lat.at(s, j) - lat_mean[j]) * (chan_mean.at(s, c) - ch_mean[c]);
      }
      cov /= static_cast<double>(n);
      result.corr.at(j, c) = std::clamp(cov / (lat_sd[j] * ch_sd[c]), -1.0, 1.0);
    }
  }
  return result;
}

void save_ae(CheckpointWriter& writer, const TrainedAe& ae) {
  std::vector<double> topo{static_cast<double>(ae.in_channels),
                           static_cast<double>(ae.t_win),
                           static_cast<double>(ae.config.latent_dim),
                           static_cast<double>(ae.config.encoder.size())};
  for (const ConvSpec& l : ae.config.encoder) {
    topo.push_back(static_cast<double>(l.channels));
    topo.push_back(static_cast<double>(l.kernel));
    topo.push_back(static_cast<double>(l.stride));
  }
  writer.add("ae.topology", Tensor({topo.size()}, topo));
  for (const Parameter* p : ae.parameters()) writer.add("ae." + p->name, p->value);
}

TrainedAe load_ae(const CheckpointReader& reader) {
  Tensor topo = reader.get("ae.topology");
  require(topo.size() >= 4, errc::incompatible_checkpoint, "truncated ae.topology");
  AeConfig cfg;
  std::size_t in_channels = static_cast<std::size_t>(topo[0]);
  std::size_t t_win = static_cast<std::size_t>(topo[1]);
  cfg.latent_dim = static_cast<std::size_t>(topo[2]);
  std::size_t layers = static_cast<std::size_t>(topo[3]);
  require(topo.size() == 4 + 3 * layers, errc::incompatible_checkpoint,
          "ae.topology length does not match its layer count");
  for (std::size_t i = 0; i < layers; ++i) {
    cfg.encoder.push_back({static_cast<std::size_t>(topo[4 + 3 * i]),
                           static_cast<std::size_t>(topo[5 + 3 * i]),
                           static_cast<std::size_t>(topo[6 + 3 * i])});
  }
  Rng dummy(0);
  TrainedAe ae = build_ae(in_channels, t_win, cfg, dummy);
  for (Parameter* p : ae.parameters()) {
    Tensor stored = reader.get("ae." + p->name);
    require(stored.shape() == p->value.shape(), errc::incompatible_checkpoint,
            "checkpoint array ae." + p->name + " has shape " + stored.shape_str() +
                ", expected " + p->value.shape_str());
    p->value = std::move(stored);
    p->zero_grad();
  }
  return ae;
}

}  // namespace netcast
