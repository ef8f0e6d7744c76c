#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netcast/autoencoder.hpp"
#include "netcast/blstm.hpp"
#include "netcast/data.hpp"
#include "netcast/kpf.hpp"
#include "netcast/metrics.hpp"

namespace netcast::pipeline {

struct DataConfig {
  bool use_synth = true;
  SynthConfig synth;
  std::string csv_path;  // used when use_synth is false
};

struct PipelineConfig {
  DataConfig data;
  WindowSpec window;
  bool include_solar_channel = false;  // add solar_pv as a model input
  SplitSpec split;
  AeConfig ae;
  kpf::Options kpf;
  blstm::Config blstm;  // input_dim and horizon are derived, not configured
  std::uint64_t seed = 0;
  std::string out_dir = "run";
};

/// Parse and validate a JSON config. Unknown keys anywhere are rejected,
/// as is any value a later stage would refuse (fail-fast completeness).
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::filesystem::path& path);
/// Canonical serialization of the validated config.
std::string config_to_json(const PipelineConfig& cfg);
/// FNV-1a hash of the canonical serialization, hex-encoded.
std::string config_hash(const PipelineConfig& cfg);

/// Classify an error for the process exit code: 0 success, 2 config,
/// 3 data, 4 training divergence, 1 anything else.
int exit_code_for(errc code);

struct StageSeconds {
  double ae = 0.0;
  double kpf = 0.0;
  double blstm = 0.0;
};

struct TrainedPipeline {
  PipelineConfig config;
  TrainedAe ae;
  kpf::Model kpf_model;
  blstm::Model lstm;
  NormStats stats;
  // Per-dimension standardization of the forecaster conditioning, fitted on
  // the encoded training windows; applied to both the latent and the
  // sampler-draw half so the LSTM sees unit-scale inputs. Empty = identity.
  std::vector<double> cond_mean, cond_scale;
  StageSeconds timings;  // wall-clock, informational only
};

/// Load or synthesize the configured site.
SiteRecord load_site(const PipelineConfig& cfg, const std::string& csv_override = "");
/// The window spec with the solar channel applied when configured.
WindowSpec effective_window_spec(const PipelineConfig& cfg);

/// Stage 1 trains the autoencoder on the train split, stage 2 fits the
/// kPF sampler over all encoded training windows, stage 3 trains the
/// Bayesian LSTM on (encoder latent || kPF sample) -> target pairs with a
/// fresh kPF draw per example per epoch.
TrainedPipeline train_pipeline(const PipelineConfig& cfg, const SiteRecord& site);

void save_pipeline(const TrainedPipeline& tp, const std::filesystem::path& dir);
TrainedPipeline load_pipeline(const std::filesystem::path& dir);

/// [mc, 2*latent_dim] conditioning block for the forecaster: each row is
/// the standardized latent concatenated with one standardized sampler draw.
Tensor make_conditions(const TrainedPipeline& tp, const Tensor& latent,
                       const kpf::SampleBatch& batch);

/// Probabilistic forecast from one raw-unit input window [C, t_win];
/// output in kW with timestamps anchored at `target_start_time`.
blstm::ForecastDistribution forecast_window(const TrainedPipeline& tp,
                                            const Tensor& window_kw,
                                            std::int64_t target_start_time, Rng& rng);

/// Forecast every sample of a prepared evaluation split and pool all
/// (timestep, observation) pairs into one seasonal report, in kW.
metrics::EvalReport evaluate_split(const TrainedPipeline& tp, const WindowedDataset& raw,
                                   const std::string& split_label, std::uint64_t seed);

// ---- Command-level drivers (the CLI is a thin shell over these) ----

/// Write the synthesized site as CSV; returns the file path.
std::filesystem::path cmd_synth(const PipelineConfig& cfg);

struct TrainOutcome {
  std::filesystem::path checkpoint_dir;
  std::filesystem::path manifest_path;
  metrics::EvalReport test_report;
};
/// Full training run: checkpoints plus an atomically written run manifest
/// (config hash, stage timings, metric summary, software version).
TrainOutcome cmd_train(const PipelineConfig& cfg, const std::string& csv_override = "");

/// Forecast one horizon from the last complete window of the data source;
/// writes CSV columns timestamp, mu_kw, sigma_kw, lo50, hi50, lo95, hi95,
/// lo99, hi99 and returns the path.
std::filesystem::path cmd_forecast(const std::filesystem::path& checkpoint_dir,
                                   const std::string& csv_override,
                                   const std::filesystem::path& out_dir,
                                   std::uint64_t seed);

/// Evaluate the requested split ("test" or "train") and write report.json.
metrics::EvalReport cmd_evaluate(const std::filesystem::path& checkpoint_dir,
                                 const std::string& csv_override, const std::string& split,
                                 const std::filesystem::path& out_dir, std::uint64_t seed);

/// names: "penetration", "aggregation", "missing".
void cmd_experiment(const std::string& name, const PipelineConfig& base,
                    const std::filesystem::path& out_dir);

// ---- Experiment internals (exposed for the acceptance suite) ----

struct ExperimentRow {
  std::string label;
  std::size_t horizon = 0;
  metrics::EvalReport report;
};

/// Train/evaluate one synthetic site per penetration level and horizon.
std::vector<ExperimentRow> penetration_experiment(const PipelineConfig& base,
                                                  const std::vector<double>& penetrations,
                                                  const std::filesystem::path& out_dir);

/// Train/evaluate aggregates of the given site counts.
std::vector<ExperimentRow> aggregation_experiment(const PipelineConfig& base,
                                                  const std::vector<std::size_t>& sizes,
                                                  const std::filesystem::path& out_dir);

struct MissingRunResult {
  // Concatenated rolling day-ahead tracks over the masked window.
  std::vector<std::int64_t> timestamps;
  std::vector<double> obs_kw;
  blstm::ForecastDistribution missing;   // net-load unavailable, self-imputed
  blstm::ForecastDistribution complete;  // all measurements available
};

/// Mask net_load for `masked_steps` steps starting at `mask_start`, then
/// forecast across the gap in rolling day-ahead fashion, feeding each
/// Monte-Carlo member its own predicted means where measurements are
/// masked; the complete-measurement track is produced for overlay.
MissingRunResult missing_experiment(const TrainedPipeline& tp, const SiteRecord& site,
                                    std::int64_t mask_start, std::size_t masked_steps,
                                    std::uint64_t seed);

}  // namespace netcast::pipeline
