#include <benchmark/benchmark.h>

#include "netcast/autodiff.hpp"
#include "netcast/blstm.hpp"
#include "netcast/kpf.hpp"
#include "netcast/metrics.hpp"
#include "netcast/rng.hpp"
#include "netcast/tensor.hpp"

using namespace netcast;

namespace {

void bm_kpf_fit(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor x_e = gaussian(rng, {n, 20});
  for (auto _ : state) {
    kpf::Model model = kpf::fit(x_e, kpf::Options{});
    benchmark::DoNotOptimize(model.k_inv);
  }
}
BENCHMARK(bm_kpf_fit)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void bm_kpf_sample(benchmark::State& state) {
  Rng rng(2);
  Tensor x_e = gaussian(rng, {static_cast<std::size_t>(state.range(0)), 20});
  kpf::Model model = kpf::fit(x_e, kpf::Options{});
  for (auto _ : state) {
    kpf::SampleBatch batch = kpf::sample(model, 30, rng);
    benchmark::DoNotOptimize(batch.samples);
  }
}
BENCHMARK(bm_kpf_sample)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void bm_conv1d_forward(benchmark::State& state) {
  Rng rng(3);
  Tensor kernel = gaussian(rng, {16, 3, 5});
  Tensor x = gaussian(rng, {3, 480});
  Tape tape(false);
  for (auto _ : state) {
    Var out = tape.conv1d(tape.constant(kernel), tape.constant(x), 4, 2);
    benchmark::DoNotOptimize(out.value());
    tape.clear();
  }
}
BENCHMARK(bm_conv1d_forward)->Unit(benchmark::kMicrosecond);

void bm_conv1d_train_step(benchmark::State& state) {
  Rng rng(4);
  Parameter kernel(gaussian(rng, {16, 3, 5}), "k");
  Tensor x = gaussian(rng, {3, 480});
  for (auto _ : state) {
    Tape tape(true);
    Var out = tape.conv1d(tape.leaf(kernel), tape.constant(x), 4, 2);
    Var loss = tape.mean(tape.square(out));
    tape.backward(loss);
    benchmark::DoNotOptimize(kernel.grad);
    kernel.grad.fill(0.0);
  }
}
BENCHMARK(bm_conv1d_train_step)->Unit(benchmark::kMicrosecond);

void bm_blstm_forecast(benchmark::State& state) {
  blstm::Config cfg;  // default: input 40, hidden 16, horizon 96
  cfg.mc_samples = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  blstm::Model model = blstm::Model::init(cfg, rng);
  Tensor conditions = gaussian(rng, {cfg.mc_samples, cfg.input_dim});
  for (auto _ : state) {
    blstm::ForecastDistribution fc = blstm::forecast(model, conditions, rng);
    benchmark::DoNotOptimize(fc.mu_pred);
  }
}
BENCHMARK(bm_blstm_forecast)->Arg(1)->Arg(30)->Unit(benchmark::kMillisecond);

void bm_crps_closed(benchmark::State& state) {
  Rng rng(6);
  for (auto _ : state) {
    double v = metrics::crps_gaussian(rng.normal(), 1.0 + rng.uniform(), rng.normal());
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(bm_crps_closed);

void bm_crps_quadrature(benchmark::State& state) {
  Rng rng(7);
  for (auto _ : state) {
    double v =
        metrics::crps_integral_gaussian(rng.normal(), 1.0 + rng.uniform(), rng.normal());
    benchmark::DoNotOptimize(v);
  }
}
BENCHMARK(bm_crps_quadrature)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
