#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "netcast/blstm.hpp"
#include "netcast/errors.hpp"
#include "netcast/mathfn.hpp"

using namespace netcast;

namespace {

blstm::Config tiny_config(std::size_t input = 3, std::size_t hidden = 4,
                          std::size_t horizon = 2) {
  blstm::Config cfg;
  cfg.input_dim = input;
  cfg.hidden_dim = hidden;
  cfg.horizon = horizon;
  cfg.mc_samples = 4;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  return cfg;
}

double inv_softplus(double y) { return std::log(std::exp(y) - 1.0); }

}  // namespace

TEST_CASE("kl is zero exactly at the prior and 0.5 for a unit mean shift") {
  blstm::Config cfg = tiny_config();
  Rng rng(1);
  blstm::Model model = blstm::Model::init(cfg, rng);
  // Set every posterior to N(0, prior_std^2).
  for (blstm::BayesianWeight* w : model.weights()) {
    w->mu.value.fill(0.0);
    w->rho.value.fill(inv_softplus(cfg.prior_std));
  }
  CHECK(std::fabs(blstm::kl_gaussian(model)) < 1e-9);

  // One weight moved to mu=1 adds exactly 1/2.
  model.weights()[0]->mu.value[0] = 1.0;
  CHECK(blstm::kl_gaussian(model) == doctest::Approx(0.5).epsilon(1e-9));

  // Tape version agrees.
  Tape tape(true);
  CHECK(blstm::kl_gaussian_graph(tape, model).scalar() ==
        doctest::Approx(blstm::kl_gaussian(model)).epsilon(1e-10));
}

TEST_CASE("kl matches a monte-carlo estimate within a percent") {
  blstm::Config cfg = tiny_config(2, 2, 1);
  cfg.prior_std = 1.5;
  Rng rng(2);
  blstm::Model model = blstm::Model::init(cfg, rng);
  double closed = blstm::kl_gaussian(model);
  REQUIRE(closed > 0.0);

  // MC estimate of E_q[ln q(theta) - ln p(theta)] over all weights.
  Rng mc(42);
  const int draws = 200000;
  double acc = 0.0;
  for (int it = 0; it < draws; ++it) {
    double term = 0.0;
    for (blstm::BayesianWeight* w : model.weights()) {
      for (std::size_t i = 0; i < w->mu.value.size(); ++i) {
        double mu = w->mu.value[i];
        double sd = softplus(w->rho.value[i]);
        double theta = mu + sd * mc.normal();
        double zq = (theta - mu) / sd;
        double zp = theta / cfg.prior_std;
        term += -std::log(sd) - 0.5 * zq * zq + std::log(cfg.prior_std) + 0.5 * zp * zp;
      }
    }
    acc += term;
  }
  double estimate = acc / draws;
  CHECK(std::fabs(estimate - closed) / closed < 0.01);
}

TEST_CASE("free energy with zero kl weight is the mean nll") {
  blstm::Config cfg = tiny_config();
  Rng rng(3);
  blstm::Model model = blstm::Model::init(cfg, rng);
  std::vector<blstm::LatentSample> batch(3);
  Rng data(4);
  for (auto& s : batch) {
    s.condition = gaussian(data, {cfg.input_dim});
    s.target = gaussian(data, {cfg.horizon});
  }
  blstm::NoiseDraw eps = model.draw_noise(data);
  double fe0 = blstm::free_energy(model, batch, 0.0, eps);
  double fe1 = blstm::free_energy(model, batch, 1.0, eps);
  CHECK(fe1 - fe0 == doctest::Approx(blstm::kl_gaussian(model)).epsilon(1e-9));

  // Recompute the nll by hand from the member forecasts of this draw.
  Tape tape(false);
  blstm::WeightDraw w = model.sample_weights(tape, eps);
  double nll = 0.0;
  for (const auto& s : batch) {
    auto steps = model.unroll(tape, w, tape.constant(s.condition));
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
      double mu = steps[t].first.scalar();
      double sd = std::fmax(std::exp(0.5 * steps[t].second.scalar()), 1e-6);
      double d = s.target[t] - mu;
      nll += std::log(sd) + 0.5 * d * d / (sd * sd);
    }
  }
  CHECK(fe0 == doctest::Approx(nll / batch.size()).epsilon(1e-9));
}

TEST_CASE("gaussian nll helper") {
  // ln(sigma) + (y-mu)^2 / (2 sigma^2) summed over steps.
  double expect = std::log(2.0) + 0.5 * 1.0 / 4.0 + std::log(1.0) + 0.5 * 4.0;
  CHECK(blstm::gaussian_nll({1.0, 0.0}, {2.0, 1.0}, {2.0, 2.0}) ==
        doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("training overfits a handful of samples") {
  blstm::Config cfg = tiny_config(2, 8, 2);
  cfg.epochs = 300;
  cfg.batch_size = 5;
  cfg.kl_weight = 1e-6;
  cfg.lr = 1e-2;
  std::vector<blstm::LatentSample> data(5);
  Rng rng(9);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i].condition = gaussian(rng, {2});
    data[i].target = Tensor({2}, {0.5 * data[i].condition[0], -0.3 * data[i].condition[1]});
  }
  blstm::Model model = blstm::train(data, cfg, 31);
  Tensor conditions({cfg.mc_samples, 2});
  for (std::size_t i = 0; i < cfg.mc_samples; ++i)
    for (std::size_t j = 0; j < 2; ++j) conditions.at(i, j) = data[0].condition[j];
  Rng fr(5);
  blstm::ForecastDistribution fc = blstm::forecast(model, conditions, fr);
  CHECK(std::fabs(fc.mu_pred[0] - data[0].target[0]) < 0.25);
  CHECK(std::fabs(fc.mu_pred[1] - data[0].target[1]) < 0.25);
}

TEST_CASE("training and forecasting are deterministic in their seeds") {
  blstm::Config cfg = tiny_config();
  std::vector<blstm::LatentSample> data(4);
  Rng rng(6);
  for (auto& s : data) {
    s.condition = gaussian(rng, {cfg.input_dim});
    s.target = gaussian(rng, {cfg.horizon});
  }
  blstm::Model a = blstm::train(data, cfg, 77);
  blstm::Model b = blstm::train(data, cfg, 77);
  Tensor cond({cfg.mc_samples, cfg.input_dim});
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = 0.3;
  Rng fa(8), fb(8);
  blstm::ForecastDistribution da = blstm::forecast(a, cond, fa);
  blstm::ForecastDistribution db = blstm::forecast(b, cond, fb);
  CHECK(da.mu_pred == db.mu_pred);
  CHECK(da.sigma_pred == db.sigma_pred);
}

TEST_CASE("the condition refresh hook runs every epoch and reaches the loss") {
  blstm::Config cfg = tiny_config();
  cfg.epochs = 5;
  std::vector<blstm::LatentSample> data(4);
  Rng rng(10);
  for (auto& s : data) {
    s.condition = gaussian(rng, {cfg.input_dim});
    s.target = gaussian(rng, {cfg.horizon});
  }
  std::size_t calls = 0;
  auto refresh = [&calls](std::size_t epoch, std::vector<blstm::LatentSample>& d) {
    CHECK(epoch == calls);
    ++calls;
    for (auto& s : d) s.condition.fill(static_cast<double>(epoch));
  };
  (void)blstm::train(data, cfg, 12, refresh);
  CHECK(calls == cfg.epochs);
  // The caller's dataset must stay untouched.
  CHECK(data[0].condition[0] != doctest::Approx(4.0));
}

TEST_CASE("mixture moments combine aleatoric and epistemic spread") {
  Tensor mus({2, 1}, {1.0, 3.0});
  Tensor sigmas({2, 1}, {0.5, 0.5});
  blstm::ForecastDistribution fc = blstm::mixture_from_members(mus, sigmas);
  CHECK(fc.mu_pred[0] == doctest::Approx(2.0));
  // var = mean(0.25) + pop-var(1,3) = 0.25 + 1 = 1.25
  CHECK(fc.sigma_pred[0] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
  CHECK(fc.mc_samples_used == 2);
}

TEST_CASE("interval widths follow the z table") {
  blstm::ForecastDistribution fc;
  fc.mu_pred = {10.0};
  fc.sigma_pred = {2.0};
  fc.timestamps = {0};
  auto [lo95, hi95] = blstm::interval(fc, 95);
  CHECK(hi95[0] - lo95[0] == doctest::Approx(2.0 * 1.9599639845400545 * 2.0).epsilon(1e-12));
  auto [lo_w, hi_w] = blstm::interval(fc, 95, true);
  CHECK(hi_w[0] - lo_w[0] == doctest::Approx(8.0).epsilon(1e-12));
  CHECK_THROWS_AS(blstm::interval(fc, 80), Error);
}

TEST_CASE("blstm checkpoint round trip preserves forecasts") {
  blstm::Config cfg = tiny_config();
  std::vector<blstm::LatentSample> data(4);
  Rng rng(14);
  for (auto& s : data) {
    s.condition = gaussian(rng, {cfg.input_dim});
    s.target = gaussian(rng, {cfg.horizon});
  }
  blstm::Model model = blstm::train(data, cfg, 55);

  std::filesystem::path dir = std::filesystem::temp_directory_path() / "netcast_blstm_ckpt";
  std::filesystem::remove_all(dir);
  CheckpointWriter w;
  blstm::save_blstm(w, model);
  w.write(dir);
  CheckpointReader r(dir);
  blstm::Model back = blstm::load_blstm(r);
  CHECK(back.config.hidden_dim == cfg.hidden_dim);
  CHECK(back.scalar_weight_count() == model.scalar_weight_count());

  Tensor cond({cfg.mc_samples, cfg.input_dim});
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = -0.2;
  Rng fa(3), fb(3);
  blstm::ForecastDistribution da = blstm::forecast(model, cond, fa);
  blstm::ForecastDistribution db = blstm::forecast(back, cond, fb);
  CHECK(da.mu_pred == db.mu_pred);
  CHECK(da.sigma_pred == db.sigma_pred);
  std::filesystem::remove_all(dir);
}
