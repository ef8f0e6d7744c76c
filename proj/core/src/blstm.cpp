#include "netcast/blstm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "netcast/layers.hpp"
#include "netcast/mathfn.hpp"
#include "netcast/optim.hpp"

namespace netcast::blstm {

namespace {

constexpr double kSigmaFloor = 1e-6;
constexpr const char* kWeightNames[] = {"wx", "wh", "b", "head_w", "head_b"};

/// Per-sample negative log-likelihood graph over the unrolled horizon.
Var nll_graph(Tape& t, const std::vector<std::pair<Var, Var>>& steps,
              const Tensor& target) {
  require(steps.size() == target.size(), errc::length_mismatch,
          "unrolled steps and target horizon differ");
  Var y = t.constant(target);
  Var total = t.constant(Tensor::scalar(0.0));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    Var mu = steps[i].first;
    Var sigma = t.clamp_min(t.exp(t.mul_scalar(steps[i].second, 0.5)), kSigmaFloor);
    Var diff = t.sub(mu, t.slice(y, i, {1}));
    Var quad = t.div(t.mul_scalar(t.square(diff), 0.5), t.square(sigma));
    total = t.add(total, t.add(t.log(sigma), quad));
  }
  return total;
}

}  // namespace

BayesianWeight::BayesianWeight(Tensor mu_init, double rho_init, const std::string& name)
    : mu(std::move(mu_init), name) {
  Tensor r = Tensor::zeros_like(mu.value);
  r.fill(rho_init);
  rho = Parameter(std::move(r), name);
}

Model Model::init(const Config& cfg, Rng& rng) {
  require(cfg.input_dim >= 1 && cfg.hidden_dim >= 1 && cfg.horizon >= 1 &&
              cfg.mc_samples >= 1 && cfg.prior_std > 0.0,
          errc::out_of_range, "model dimensions must be positive");
  Model m;
  m.config = cfg;
  std::size_t h = cfg.hidden_dim, in = cfg.input_dim;
  // Posterior means start like ordinary point weights; posterior stds start
  // small (softplus(-3) ~ 0.05) so early training is near-deterministic.
  const double rho0 = -3.0;
  m.wx = BayesianWeight(glorot_uniform(rng, {4 * h, in}, in, h), rho0, kWeightNames[0]);
  m.wh = BayesianWeight(glorot_uniform(rng, {4 * h, h}, h, h), rho0, kWeightNames[1]);
  Tensor bias({4 * h});
  for (std::size_t i = h; i < 2 * h; ++i) bias[i] = 1.0;  // open forget gates
  m.b = BayesianWeight(std::move(bias), rho0, kWeightNames[2]);
  m.head_w = BayesianWeight(glorot_uniform(rng, {2, h}, h, 2), rho0, kWeightNames[3]);
  m.head_b = BayesianWeight(Tensor({2}), rho0, kWeightNames[4]);
  return m;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (BayesianWeight* w : weights()) {
    out.push_back(&w->mu);
    out.push_back(&w->rho);
  }
  return out;
}

std::vector<BayesianWeight*> Model::weights() {
  return {&wx, &wh, &b, &head_w, &head_b};
}

std::size_t Model::scalar_weight_count() const {
  auto ws = const_cast<Model*>(this)->weights();
  std::size_t n = 0;
  for (const BayesianWeight* w : ws) n += w->mu.size() + w->rho.size();
  return n;
}

NoiseDraw Model::draw_noise(Rng& rng) const {
  NoiseDraw eps;
  eps.wx = gaussian(rng, wx.mu.value.shape());
  eps.wh = gaussian(rng, wh.mu.value.shape());
  eps.b = gaussian(rng, b.mu.value.shape());
  eps.head_w = gaussian(rng, head_w.mu.value.shape());
  eps.head_b = gaussian(rng, head_b.mu.value.shape());
  return eps;
}

WeightDraw Model::sample_weights(Tape& tape, const NoiseDraw& eps) const {
  // leaf() only records gradient bindings on recording tapes, so this cast
  // cannot lead to mutation through an inference (no-grad) tape.
  auto& self = const_cast<Model&>(*this);
  auto draw = [&tape](BayesianWeight& w, const Tensor& e) {
    return tape.add(tape.leaf(w.mu),
                    tape.mul(tape.softplus(tape.leaf(w.rho)), tape.constant(e)));
  };
  return {draw(self.wx, eps.wx), draw(self.wh, eps.wh), draw(self.b, eps.b),
          draw(self.head_w, eps.head_w), draw(self.head_b, eps.head_b)};
}

std::vector<std::pair<Var, Var>> Model::unroll(Tape& tape, const WeightDraw& w,
                                               Var condition) const {
  require(condition.value().size() == config.input_dim, errc::shape_mismatch,
          "condition vector length " + std::to_string(condition.value().size()) +
              ", expected " + std::to_string(config.input_dim));
  std::size_t h = config.hidden_dim;
  // The conditioning input repeats at every step; hoist its projection.
  Var xc = tape.add(tape.matvec(w.wx, condition), w.b);
  Var hv = tape.constant(Tensor({h}));
  Var cv = tape.constant(Tensor({h}));
  std::vector<std::pair<Var, Var>> out;
  out.reserve(config.horizon);
  for (std::size_t step = 0; step < config.horizon; ++step) {
    Var pre = tape.add(xc, tape.matvec(w.wh, hv));
    Var gi = tape.sigmoid(tape.slice(pre, 0, {h}));
    Var gf = tape.sigmoid(tape.slice(pre, h, {h}));
    Var gg = tape.tanh(tape.slice(pre, 2 * h, {h}));
    Var go = tape.sigmoid(tape.slice(pre, 3 * h, {h}));
    cv = tape.add(tape.mul(gf, cv), tape.mul(gi, gg));
    hv = tape.mul(go, tape.tanh(cv));
    Var head = dense(tape, w.head_w, w.head_b, hv);
    out.emplace_back(tape.slice(head, 0, {1}), tape.slice(head, 1, {1}));
  }
  return out;
}

double kl_gaussian(const Model& model) {
  auto ws = const_cast<Model&>(model).weights();
  double sp = model.config.prior_std;
  double total = 0.0;
  for (const BayesianWeight* w : ws) {
    for (std::size_t i = 0; i < w->mu.size(); ++i) {
      double mu = w->mu.value[i];
      double sigma = softplus(w->rho.value[i]);
      total += std::log(sp / sigma) + (sigma * sigma + mu * mu) / (2.0 * sp * sp) - 0.5;
    }
  }
  return total;
}

Var kl_gaussian_graph(Tape& tape, const Model& model) {
  auto& self = const_cast<Model&>(model);
  double sp = model.config.prior_std;
  Var total = tape.constant(Tensor::scalar(0.0));
  for (BayesianWeight* w : self.weights()) {
    Var mu = tape.leaf(w->mu);
    Var sigma = tape.softplus(tape.leaf(w->rho));
    Var quad = tape.mul_scalar(tape.add(tape.square(sigma), tape.square(mu)),
                               1.0 / (2.0 * sp * sp));
    Var elem = tape.add_scalar(tape.sub(quad, tape.log(sigma)), std::log(sp) - 0.5);
    total = tape.add(total, tape.sum(elem));
  }
  return total;
}

double gaussian_nll(const std::vector<double>& mu, const std::vector<double>& sigma,
                    const std::vector<double>& y_obs) {
  require(mu.size() == y_obs.size() && sigma.size() == y_obs.size() && !y_obs.empty(),
          errc::length_mismatch, "gaussian_nll sequence lengths differ");
  double total = 0.0;
  for (std::size_t i = 0; i < y_obs.size(); ++i) {
    double s = std::fmax(sigma[i], kSigmaFloor);
    double d = y_obs[i] - mu[i];
    total += std::log(s) + d * d / (2.0 * s * s);
  }
  return total;
}

double free_energy(const Model& model, const std::vector<LatentSample>& batch,
                   double kl_weight, const NoiseDraw& eps) {
  require(!batch.empty(), errc::empty_dataset, "free energy of an empty batch");
  Tape tape(false);
  WeightDraw w = model.sample_weights(tape, eps);
  double nll_sum = 0.0;
  for (const LatentSample& s : batch) {
    auto steps = model.unroll(tape, w, tape.constant(s.condition));
    nll_sum += nll_graph(tape, steps, s.target).scalar();
  }
  return nll_sum / static_cast<double>(batch.size()) + kl_weight * kl_gaussian(model);
}

Model train(const std::vector<LatentSample>& dataset, const Config& cfg, std::uint64_t seed,
            const ConditionRefresh& refresh) {
  require(!dataset.empty(), errc::empty_dataset, "cannot train on an empty dataset");
  Rng root(seed);
  Rng init_rng = root.stream(0);
  Model model = Model::init(cfg, init_rng);

  std::size_t batches = (dataset.size() + cfg.batch_size - 1) / cfg.batch_size;
  double kl_w = cfg.kl_weight > 0.0 ? cfg.kl_weight : 1.0 / static_cast<double>(batches);

  Adam opt(model.parameters(), {.lr = cfg.lr});
  std::vector<LatentSample> data = dataset;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  Tape tape(true);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (refresh) refresh(epoch, data);
    Rng shuffle_rng = root.stream(1).stream(epoch);
    shuffle_rng.shuffle(order);
    Rng noise_rng = root.stream(2).stream(epoch);
    double epoch_loss = 0.0;
    for (std::size_t bstart = 0, bi = 0; bstart < order.size();
         bstart += cfg.batch_size, ++bi) {
      std::size_t bs = std::min(cfg.batch_size, order.size() - bstart);
      // One weight perturbation per batch; every sample in the batch sees
      // the same theta, matching a single-draw free-energy estimate.
      NoiseDraw eps = model.draw_noise(noise_rng);
      double batch_nll = 0.0;
      for (std::size_t s = 0; s < bs; ++s) {
        const LatentSample& sample = data[order[bstart + s]];
        tape.clear();
        WeightDraw w = model.sample_weights(tape, eps);
        auto steps = model.unroll(tape, w, tape.constant(sample.condition));
        Var nll = nll_graph(tape, steps, sample.target);
        batch_nll += nll.scalar();
        tape.backward(tape.mul_scalar(nll, 1.0 / static_cast<double>(bs)));
      }
      tape.clear();
      tape.backward(tape.mul_scalar(kl_gaussian_graph(tape, model), kl_w));
      opt.step();
      epoch_loss += batch_nll / static_cast<double>(bs) + kl_w * kl_gaussian(model);
    }
    epoch_loss /= static_cast<double>(batches);
    require(std::isfinite(epoch_loss), errc::divergent_training,
            "free energy became non-finite at epoch " + std::to_string(epoch));
    model.loss_trace.push_back(epoch_loss);
  }
  return model;
}

std::pair<Tensor, Tensor> forecast_members(const Model& model, const Tensor& conditions,
                                           Rng& rng) {
  require(conditions.rank() == 2 && conditions.dim(1) == model.config.input_dim,
          errc::shape_mismatch, "conditions must be [mc, input_dim]");
  std::size_t mc = conditions.dim(0), horizon = model.config.horizon;
  require(mc >= 1, errc::out_of_range, "at least one Monte-Carlo member required");

  Tensor mus({mc, horizon}), sigmas({mc, horizon});
  Tape tape(false);
  for (std::size_t i = 0; i < mc; ++i) {
    NoiseDraw eps = model.draw_noise(rng);
    tape.clear();
    WeightDraw w = model.sample_weights(tape, eps);
    Tensor cond({model.config.input_dim});
    for (std::size_t j = 0; j < cond.size(); ++j) cond[j] = conditions.at(i, j);
    auto steps = model.unroll(tape, w, tape.constant(cond));
    for (std::size_t t = 0; t < horizon; ++t) {
      mus.at(i, t) = steps[t].first.scalar();
      sigmas.at(i, t) = std::fmax(std::exp(0.5 * steps[t].second.scalar()), kSigmaFloor);
    }
  }
  return {std::move(mus), std::move(sigmas)};
}

ForecastDistribution mixture_from_members(const Tensor& mus, const Tensor& sigmas) {
  require(mus.rank() == 2 && sigmas.same_shape(mus), errc::shape_mismatch,
          "member tracks must be matching [mc, horizon] tensors");
  std::size_t mc = mus.dim(0), horizon = mus.dim(1);
  ForecastDistribution fc;
  fc.mc_samples_used = mc;
  fc.mu_pred.resize(horizon);
  fc.sigma_pred.resize(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    double mean_mu = 0.0, mean_var = 0.0, mean_mu2 = 0.0;
    for (std::size_t i = 0; i < mc; ++i) {
      mean_mu += mus.at(i, t);
      mean_mu2 += mus.at(i, t) * mus.at(i, t);
      mean_var += sigmas.at(i, t) * sigmas.at(i, t);
    }
    double inv = 1.0 / static_cast<double>(mc);
    mean_mu *= inv;
    mean_mu2 *= inv;
    mean_var *= inv;
    // Mixture moments: aleatoric mean variance plus epistemic spread of
    // the member means (population variance over the mc draws).
    fc.mu_pred[t] = mean_mu;
    fc.sigma_pred[t] =
        std::fmax(std::sqrt(mean_var + std::fmax(mean_mu2 - mean_mu * mean_mu, 0.0)),
                  kSigmaFloor);
  }
  return fc;
}

ForecastDistribution forecast(const Model& model, const Tensor& conditions, Rng& rng) {
  auto [mus, sigmas] = forecast_members(model, conditions, rng);
  return mixture_from_members(mus, sigmas);
}

std::pair<std::vector<double>, std::vector<double>> interval(
    const ForecastDistribution& fc, int level_pct, bool wide_95) {
  double z = z_for_level(level_pct, wide_95);
  std::vector<double> lo(fc.mu_pred.size()), hi(fc.mu_pred.size());
  for (std::size_t t = 0; t < fc.mu_pred.size(); ++t) {
    lo[t] = fc.mu_pred[t] - z * fc.sigma_pred[t];
    hi[t] = fc.mu_pred[t] + z * fc.sigma_pred[t];
  }
  return {std::move(lo), std::move(hi)};
}

void save_blstm(CheckpointWriter& writer, const Model& model) {
  const Config& c = model.config;
  Tensor topo({5}, {static_cast<double>(c.input_dim), static_cast<double>(c.hidden_dim),
                    static_cast<double>(c.horizon), static_cast<double>(c.mc_samples),
                    c.prior_std});
  writer.add("blstm.topology", topo);
  auto ws = const_cast<Model&>(model).weights();
  for (BayesianWeight* w : ws) {
    writer.add("blstm.mu." + w->mu.name, w->mu.value);
    writer.add("blstm.rho." + w->rho.name, w->rho.value);
  }
}

Model load_blstm(const CheckpointReader& reader) {
  Tensor topo = reader.get("blstm.topology");
  require(topo.size() == 5, errc::incompatible_checkpoint, "malformed blstm.topology");
  Config cfg;
  cfg.input_dim = static_cast<std::size_t>(topo[0]);
  cfg.hidden_dim = static_cast<std::size_t>(topo[1]);
  cfg.horizon = static_cast<std::size_t>(topo[2]);
  cfg.mc_samples = static_cast<std::size_t>(topo[3]);
  cfg.prior_std = topo[4];
  Rng dummy(0);
  Model model = Model::init(cfg, dummy);
  for (BayesianWeight* w : model.weights()) {
    Tensor mu = reader.get("blstm.mu." + w->mu.name);
    Tensor rho = reader.get("blstm.rho." + w->rho.name);
    require(mu.shape() == w->mu.value.shape() && rho.shape() == w->rho.value.shape(),
            errc::incompatible_checkpoint,
            "checkpoint shapes for blstm." + w->mu.name + " do not match the topology");
    w->mu.value = std::move(mu);
    w->rho.value = std::move(rho);
    w->mu.zero_grad();
    w->rho.zero_grad();
  }
  return model;
}

}  // namespace netcast::blstm
