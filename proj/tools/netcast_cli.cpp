#include <cstdio>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "netcast/pipeline.hpp"
#include "netcast/version.hpp"

namespace {

using namespace netcast;
using nlohmann::json;

/// Config file plus command-line overrides, funneled through the same
/// strict parser so overrides obey identical validation.
pipeline::PipelineConfig resolve_config(const std::string& config_path,
                                        const std::optional<std::uint64_t>& seed,
                                        const std::string& out_dir) {
  json j = json::object();
  if (!config_path.empty()) {
    std::ifstream f(config_path, std::ios::binary);
    require(f.good(), errc::config_error, "cannot open config '" + config_path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      fail(errc::config_error, std::string("config is not valid JSON: ") + e.what());
    }
    require(j.is_object(), errc::config_error, "config root must be a JSON object");
  }
  if (seed.has_value()) j["seed"] = *seed;
  if (!out_dir.empty()) j["out_dir"] = out_dir;
  return pipeline::parse_config(j.dump());
}

std::filesystem::path resolve_checkpoint(const std::string& checkpoint,
                                         const std::string& config_path,
                                         const std::optional<std::uint64_t>& seed,
                                         const std::string& out_dir) {
  if (!checkpoint.empty()) return checkpoint;
  require(!config_path.empty() || !out_dir.empty(), errc::config_error,
          "pass --checkpoint, or --config/--out so the default "
          "<out_dir>/checkpoint can be used");
  pipeline::PipelineConfig cfg = resolve_config(config_path, seed, out_dir);
  return std::filesystem::path(cfg.out_dir) / "checkpoint";
}

void print_block(const char* label, const metrics::MetricBlock& b) {
  if (b.count == 0) return;
  std::printf("%s: n=%zu mae_kw=%.4f mape_pct=%.3f pbb_pct=%.2f crps=%.4f\n", label, b.count,
              b.mae_kw, b.mape_pct, b.pbb_pct, b.crps);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kPF-AE-LSTM probabilistic net-load forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("netcast ") + kVersion);

  std::string config_path, data_path, out_dir, checkpoint, split = "test";
  std::string experiment_name;
  std::optional<std::uint64_t> seed;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config");
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--out", out_dir, "override the config output directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic site as CSV");
  add_common(synth);

  CLI::App* train = app.add_subcommand("train", "train the full pipeline and checkpoint it");
  add_common(train);
  train->add_option("--data", data_path, "train on this CSV instead of the configured source");

  CLI::App* forecast =
      app.add_subcommand("forecast", "forecast one horizon past the end of the series");
  add_common(forecast);
  forecast->add_option("--data", data_path, "forecast from this CSV");
  forecast->add_option("--checkpoint", checkpoint, "checkpoint directory");

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a split and write report.json");
  add_common(evaluate);
  evaluate->add_option("--data", data_path, "evaluate against this CSV");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint directory");
  evaluate->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));

  CLI::App* experiment = app.add_subcommand(
      "experiment", "run a study: penetration, aggregation, or missing");
  add_common(experiment);
  experiment->add_option("name", experiment_name, "experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) {
      pipeline::PipelineConfig cfg = resolve_config(config_path, seed, out_dir);
      std::filesystem::path path = pipeline::cmd_synth(cfg);
      std::printf("wrote %s\n", path.c_str());
    } else if (train->parsed()) {
      pipeline::PipelineConfig cfg = resolve_config(config_path, seed, out_dir);
      pipeline::TrainOutcome outcome = pipeline::cmd_train(cfg, data_path);
      std::printf("checkpoint %s\nmanifest %s\n", outcome.checkpoint_dir.c_str(),
                  outcome.manifest_path.c_str());
      print_block("test", outcome.test_report.overall);
    } else if (forecast->parsed()) {
      std::filesystem::path ckpt = resolve_checkpoint(checkpoint, config_path, seed, out_dir);
      std::filesystem::path out =
          out_dir.empty() ? ckpt.parent_path() : std::filesystem::path(out_dir);
      std::filesystem::path path =
          pipeline::cmd_forecast(ckpt, data_path, out, seed.value_or(0));
      std::printf("wrote %s\n", path.c_str());
    } else if (evaluate->parsed()) {
      std::filesystem::path ckpt = resolve_checkpoint(checkpoint, config_path, seed, out_dir);
      std::filesystem::path out =
          out_dir.empty() ? ckpt.parent_path() : std::filesystem::path(out_dir);
      metrics::EvalReport report =
          pipeline::cmd_evaluate(ckpt, data_path, split, out, seed.value_or(0));
      print_block(split.c_str(), report.overall);
      print_block("  winter", report.winter);
      print_block("  summer", report.summer);
    } else if (experiment->parsed()) {
      pipeline::PipelineConfig cfg = resolve_config(config_path, seed, out_dir);
      pipeline::cmd_experiment(experiment_name, cfg, cfg.out_dir);
      std::printf("experiment artifacts in %s\n", cfg.out_dir.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return pipeline::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
