#include "netcast/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "netcast/timeutil.hpp"
#include "netcast/version.hpp"

namespace netcast::pipeline {
namespace {

using nlohmann::json;

[[noreturn]] void config_fail(const std::string& msg) { fail(errc::config_error, msg); }

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* k) { return it.key() == k; });
    if (!known) config_fail("unknown key '" + it.key() + "' in " + where);
  }
}

std::uint64_t u64_field(const json& obj, const char* key, std::uint64_t fallback,
                        std::uint64_t min_value, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
    config_fail(where + "." + key + " must be a non-negative integer");
  auto value = v.get<std::uint64_t>();
  if (value < min_value)
    config_fail(where + "." + key + " must be at least " + std::to_string(min_value));
  return value;
}

std::size_t usize_field(const json& obj, const char* key, std::size_t fallback,
                        std::size_t min_value, const std::string& where) {
  return static_cast<std::size_t>(u64_field(obj, key, fallback, min_value, where));
}

double dbl_field(const json& obj, const char* key, double fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) config_fail(where + "." + key + " must be a number");
  return v.get<double>();
}

bool bool_field(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) config_fail(where + "." + key + " must be a boolean");
  return v.get<bool>();
}

std::string str_field(const json& obj, const char* key, const std::string& fallback,
                      const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) config_fail(where + "." + key + " must be a string");
  return v.get<std::string>();
}

const std::vector<std::string>& known_aux_channels() {
  static const std::vector<std::string> names = {kSolarPv, kTemperature, kHumidity,
                                                 kApparentPower, kWindDirection};
  return names;
}

void parse_data(const json& obj, DataConfig& out, bool& synth_seed_set) {
  check_keys(obj, "data", {"csv", "synth"});
  if (obj.contains("csv") && obj.contains("synth"))
    config_fail("data accepts either 'csv' or 'synth', not both");
  if (obj.contains("csv")) {
    out.use_synth = false;
    if (!obj.at("csv").is_string() || obj.at("csv").get<std::string>().empty())
      config_fail("data.csv must be a non-empty path");
    out.csv_path = obj.at("csv").get<std::string>();
    return;
  }
  out.use_synth = true;
  if (!obj.contains("synth")) return;
  const json& s = obj.at("synth");
  if (!s.is_object()) config_fail("data.synth must be an object");
  check_keys(s, "data.synth",
             {"days", "solar_penetration_target", "base_load_kw", "noise_sd", "seed",
              "site_id", "start_date"});
  out.synth.days = usize_field(s, "days", out.synth.days, 1, "data.synth");
  out.synth.solar_penetration_target = dbl_field(s, "solar_penetration_target",
                                                 out.synth.solar_penetration_target,
                                                 "data.synth");
  if (out.synth.solar_penetration_target < 0.0 || out.synth.solar_penetration_target >= 1.0)
    config_fail("data.synth.solar_penetration_target must lie in [0, 1)");
  out.synth.base_load_kw = dbl_field(s, "base_load_kw", out.synth.base_load_kw, "data.synth");
  if (out.synth.base_load_kw <= 0.0) config_fail("data.synth.base_load_kw must be positive");
  out.synth.noise_sd = dbl_field(s, "noise_sd", out.synth.noise_sd, "data.synth");
  if (out.synth.noise_sd < 0.0) config_fail("data.synth.noise_sd must be non-negative");
  if (s.contains("seed")) {
    out.synth.seed = u64_field(s, "seed", 0, 0, "data.synth");
    synth_seed_set = true;
  }
  out.synth.site_id = str_field(s, "site_id", out.synth.site_id, "data.synth");
  if (out.synth.site_id.empty()) config_fail("data.synth.site_id must be non-empty");
  if (s.contains("start_date")) {
    std::string text = str_field(s, "start_date", "", "data.synth");
    if (text.size() == 10) text += "T00:00:00Z";
    try {
      out.synth.start_time = parse_timestamp(text);
    } catch (const Error&) {
      config_fail("data.synth.start_date is not a date or timestamp: '" + text + "'");
    }
  }
}

void parse_window(const json& obj, PipelineConfig& cfg) {
  check_keys(obj, "window", {"t_win", "horizon", "stride", "channels", "include_solar"});
  cfg.window.t_win = usize_field(obj, "t_win", cfg.window.t_win, 1, "window");
  cfg.window.horizon = usize_field(obj, "horizon", cfg.window.horizon, 1, "window");
  cfg.window.stride = usize_field(obj, "stride", cfg.window.stride, 1, "window");
  cfg.include_solar_channel =
      bool_field(obj, "include_solar", cfg.include_solar_channel, "window");
  if (!obj.contains("channels")) return;
  const json& ch = obj.at("channels");
  if (!ch.is_array()) config_fail("window.channels must be an array of channel names");
  cfg.window.channel_order.clear();
  for (const json& item : ch) {
    if (!item.is_string()) config_fail("window.channels entries must be strings");
    std::string name = item.get<std::string>();
    if (name == kNetLoad) config_fail("net_load is always the first input channel");
    const auto& known = known_aux_channels();
    if (std::find(known.begin(), known.end(), name) == known.end())
      config_fail("unknown channel '" + name + "' in window.channels");
    if (std::find(cfg.window.channel_order.begin(), cfg.window.channel_order.end(), name) !=
        cfg.window.channel_order.end())
      config_fail("duplicate channel '" + name + "' in window.channels");
    cfg.window.channel_order.push_back(name);
  }
}

void parse_ae(const json& obj, AeConfig& ae) {
  check_keys(obj, "ae", {"latent_dim", "epochs", "batch_size", "lr", "encoder"});
  ae.latent_dim = usize_field(obj, "latent_dim", ae.latent_dim, 1, "ae");
  ae.epochs = usize_field(obj, "epochs", ae.epochs, 1, "ae");
  ae.batch_size = usize_field(obj, "batch_size", ae.batch_size, 1, "ae");
  ae.lr = dbl_field(obj, "lr", ae.lr, "ae");
  if (ae.lr <= 0.0) config_fail("ae.lr must be positive");
  if (!obj.contains("encoder")) return;
  const json& enc = obj.at("encoder");
  if (!enc.is_array()) config_fail("ae.encoder must be an array of layer objects");
  ae.encoder.clear();
  std::size_t li = 0;
  for (const json& layer : enc) {
    std::string where = "ae.encoder[" + std::to_string(li++) + "]";
    if (!layer.is_object()) config_fail(where + " must be an object");
    check_keys(layer, where, {"channels", "kernel", "stride"});
    ConvSpec spec;
    spec.channels = usize_field(layer, "channels", 0, 1, where);
    spec.kernel = usize_field(layer, "kernel", spec.kernel, 1, where);
    spec.stride = usize_field(layer, "stride", spec.stride, 1, where);
    ae.encoder.push_back(spec);
  }
  if (ae.encoder.empty()) config_fail("ae.encoder must not be an empty array");
}

void parse_kpf(const json& obj, kpf::Options& opts) {
  check_keys(obj, "kpf", {"gamma", "prior_dim", "squared_kernel"});
  opts.gamma = usize_field(obj, "gamma", opts.gamma, 1, "kpf");
  opts.prior_dim = usize_field(obj, "prior_dim", opts.prior_dim, 0, "kpf");
  opts.squared_kernel = bool_field(obj, "squared_kernel", opts.squared_kernel, "kpf");
}

void parse_blstm(const json& obj, blstm::Config& b) {
  check_keys(obj, "blstm",
             {"hidden_dim", "mc_samples", "kl_weight", "epochs", "batch_size", "lr",
              "prior_std"});
  b.hidden_dim = usize_field(obj, "hidden_dim", b.hidden_dim, 1, "blstm");
  b.mc_samples = usize_field(obj, "mc_samples", b.mc_samples, 1, "blstm");
  b.kl_weight = dbl_field(obj, "kl_weight", b.kl_weight, "blstm");
  if (b.kl_weight < 0.0) config_fail("blstm.kl_weight must be non-negative");
  b.epochs = usize_field(obj, "epochs", b.epochs, 1, "blstm");
  b.batch_size = usize_field(obj, "batch_size", b.batch_size, 1, "blstm");
  b.lr = dbl_field(obj, "lr", b.lr, "blstm");
  if (b.lr <= 0.0) config_fail("blstm.lr must be positive");
  b.prior_std = dbl_field(obj, "prior_std", b.prior_std, "blstm");
  if (b.prior_std <= 0.0) config_fail("blstm.prior_std must be positive");
}

PipelineConfig parse_config_object(const json& j) {
  if (!j.is_object()) config_fail("config root must be a JSON object");
  check_keys(j, "config", {"data", "window", "split", "ae", "kpf", "blstm", "seed", "out_dir"});

  PipelineConfig cfg;
  cfg.seed = u64_field(j, "seed", cfg.seed, 0, "config");
  cfg.out_dir = str_field(j, "out_dir", cfg.out_dir, "config");
  if (cfg.out_dir.empty()) config_fail("out_dir must be non-empty");

  bool synth_seed_set = false;
  if (j.contains("data")) {
    if (!j.at("data").is_object()) config_fail("data must be an object");
    parse_data(j.at("data"), cfg.data, synth_seed_set);
  }
  if (cfg.data.use_synth && !synth_seed_set) cfg.data.synth.seed = cfg.seed;

  if (j.contains("window")) {
    if (!j.at("window").is_object()) config_fail("window must be an object");
    parse_window(j.at("window"), cfg);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    if (!s.is_object()) config_fail("split must be an object");
    check_keys(s, "split", {"train_blocks", "test_blocks"});
    cfg.split.train_blocks = usize_field(s, "train_blocks", cfg.split.train_blocks, 1, "split");
    cfg.split.test_blocks = usize_field(s, "test_blocks", cfg.split.test_blocks, 1, "split");
  }
  if (j.contains("ae")) {
    if (!j.at("ae").is_object()) config_fail("ae must be an object");
    parse_ae(j.at("ae"), cfg.ae);
  }
  if (j.contains("kpf")) {
    if (!j.at("kpf").is_object()) config_fail("kpf must be an object");
    parse_kpf(j.at("kpf"), cfg.kpf);
  }
  if (j.contains("blstm")) {
    if (!j.at("blstm").is_object()) config_fail("blstm must be an object");
    parse_blstm(j.at("blstm"), cfg.blstm);
  }
  return cfg;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::io_error, "cannot open '" + tmp.string() + "' for writing");
    f << text;
    f.flush();
    require(f.good(), errc::io_error, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, errc::io_error, "cannot move '" + tmp.string() + "' into place: " + ec.message());
}

/// Independent child seed for one pipeline stage.
std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t lane) {
  return Rng(seed).stream(lane).next_u64();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

PipelineConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    config_fail(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    return parse_config_object(j);
  } catch (const json::exception& e) {
    config_fail(std::string("malformed config value: ") + e.what());
  }
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), errc::io_error, "cannot open config '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_to_json(const PipelineConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  if (cfg.data.use_synth) {
    const SynthConfig& s = cfg.data.synth;
    j["data"]["synth"] = {{"days", s.days},
                          {"solar_penetration_target", s.solar_penetration_target},
                          {"base_load_kw", s.base_load_kw},
                          {"noise_sd", s.noise_sd},
                          {"seed", s.seed},
                          {"site_id", s.site_id},
                          {"start_date", format_timestamp(s.start_time)}};
  } else {
    j["data"]["csv"] = cfg.data.csv_path;
  }
  j["window"] = {{"t_win", cfg.window.t_win},
                 {"horizon", cfg.window.horizon},
                 {"stride", cfg.window.stride},
                 {"channels", cfg.window.channel_order},
                 {"include_solar", cfg.include_solar_channel}};
  j["split"] = {{"train_blocks", cfg.split.train_blocks},
                {"test_blocks", cfg.split.test_blocks}};
  json enc = json::array();
  for (const ConvSpec& layer : cfg.ae.encoder)
    enc.push_back({{"channels", layer.channels},
                   {"kernel", layer.kernel},
                   {"stride", layer.stride}});
  j["ae"] = {{"latent_dim", cfg.ae.latent_dim},
             {"epochs", cfg.ae.epochs},
             {"batch_size", cfg.ae.batch_size},
             {"lr", cfg.ae.lr}};
  if (!enc.empty()) j["ae"]["encoder"] = enc;
  j["kpf"] = {{"gamma", cfg.kpf.gamma},
              {"prior_dim", cfg.kpf.prior_dim},
              {"squared_kernel", cfg.kpf.squared_kernel}};
  j["blstm"] = {{"hidden_dim", cfg.blstm.hidden_dim},
                {"mc_samples", cfg.blstm.mc_samples},
                {"kl_weight", cfg.blstm.kl_weight},
                {"epochs", cfg.blstm.epochs},
                {"batch_size", cfg.blstm.batch_size},
                {"lr", cfg.blstm.lr},
                {"prior_std", cfg.blstm.prior_std}};
  return j.dump();
}

std::string config_hash(const PipelineConfig& cfg) { return fnv1a_hex(config_to_json(cfg)); }

int exit_code_for(errc code) {
  switch (code) {
    case errc::config_error:
    case errc::bad_level:
    case errc::bad_gamma:
      return 2;
    case errc::missing_column:
    case errc::unparseable_timestamp:
    case errc::duplicate_timestamp:
    case errc::irregular_cadence:
    case errc::infeasible_penetration:
    case errc::no_solar_channel:
    case errc::zero_consumption:
    case errc::empty_overlap:
    case errc::series_too_short:
    case errc::constant_channel:
    case errc::out_of_range:
    case errc::empty_dataset:
    case errc::incompatible_checkpoint:
    case errc::io_error:
      return 3;
    case errc::divergent_training:
      return 4;
    default:
      return 1;
  }
}

SiteRecord load_site(const PipelineConfig& cfg, const std::string& csv_override) {
  if (!csv_override.empty()) return load_csv(csv_override);
  if (cfg.data.use_synth) return synth_site(cfg.data.synth);
  return load_csv(cfg.data.csv_path);
}

WindowSpec effective_window_spec(const PipelineConfig& cfg) {
  WindowSpec spec = cfg.window;
  if (cfg.include_solar_channel &&
      std::find(spec.channel_order.begin(), spec.channel_order.end(), kSolarPv) ==
          spec.channel_order.end())
    spec.channel_order.push_back(kSolarPv);
  return spec;
}

TrainedPipeline train_pipeline(const PipelineConfig& cfg, const SiteRecord& site) {
  WindowSpec spec = effective_window_spec(cfg);
  WindowedDataset all = window(site, spec);
  auto [train_raw, test_raw] = interleaved_split(all, cfg.split);
  require(!train_raw.samples.empty(), errc::empty_dataset,
          "the train split is empty; shorten the window or the split blocks");
  auto [train_norm, stats] = normalize(train_raw);

  TrainedPipeline tp;
  tp.config = cfg;
  tp.stats = stats;

  auto t0 = std::chrono::steady_clock::now();
  tp.ae = train_ae(train_norm, cfg.ae, derived_seed(cfg.seed, 1), stats);
  tp.timings.ae = seconds_since(t0);

  // Stage 2: embed every training window and fit the latent sampler on the
  // full encoded set.
  t0 = std::chrono::steady_clock::now();
  std::size_t n = train_norm.samples.size();
  std::size_t d = tp.ae.config.latent_dim;
  Tensor encoded({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor z = tp.ae.encode(train_norm.samples[i].input);
    for (std::size_t j = 0; j < d; ++j) encoded.at(i, j) = z[j];
  }
  kpf::Options kopts = cfg.kpf;
  // Cannot recombine more support points than exist.
  kopts.gamma = std::min(kopts.gamma, n);
  tp.kpf_model = kpf::fit(encoded, kopts);
  tp.timings.kpf = seconds_since(t0);

  // Stage 3: forecaster conditioned on [encoder latent || sampler draw],
  // with the stochastic half redrawn for every example at every epoch.
  // Latent coordinates can sit several units wide, which would saturate the
  // LSTM gates, so the conditioning is standardized per dimension with
  // statistics taken over the encoded training windows.
  t0 = std::chrono::steady_clock::now();
  blstm::Config bcfg = cfg.blstm;
  bcfg.input_dim = 2 * d;
  bcfg.horizon = spec.horizon;

  tp.cond_mean.assign(d, 0.0);
  tp.cond_scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m1 += encoded.at(i, j);
      m2 += encoded.at(i, j) * encoded.at(i, j);
    }
    m1 /= static_cast<double>(n);
    m2 /= static_cast<double>(n);
    double sd = std::sqrt(std::fmax(m2 - m1 * m1, 0.0));
    tp.cond_mean[j] = m1;
    tp.cond_scale[j] = sd > 1e-12 ? sd : 1.0;
  }

  std::vector<blstm::LatentSample> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    latent[i].condition = Tensor({2 * d});
    for (std::size_t j = 0; j < d; ++j)
      latent[i].condition[j] = (encoded.at(i, j) - tp.cond_mean[j]) / tp.cond_scale[j];
    latent[i].target = train_norm.samples[i].target;
    latent[i].target_start_time = train_norm.samples[i].target_start_time;
  }
  Rng refresh_root = Rng(cfg.seed).stream(3);
  const kpf::Model& kmodel = tp.kpf_model;
  const std::vector<double>&cmean = tp.cond_mean, &cscale = tp.cond_scale;
  auto refresh = [&refresh_root, &kmodel, &cmean, &cscale, d](
                     std::size_t epoch, std::vector<blstm::LatentSample>& data) {
    Rng r = refresh_root.stream(epoch);
    kpf::SampleBatch batch = kpf::sample(kmodel, data.size(), r);
    for (std::size_t i = 0; i < data.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        data[i].condition[d + j] = (batch.samples.at(i, j) - cmean[j]) / cscale[j];
  };
  tp.lstm = blstm::train(latent, bcfg, derived_seed(cfg.seed, 2), refresh);
  tp.timings.blstm = seconds_since(t0);
  return tp;
}

Tensor make_conditions(const TrainedPipeline& tp, const Tensor& latent,
                       const kpf::SampleBatch& batch) {
  std::size_t mc = batch.samples.dim(0), d = latent.size();
  require(batch.samples.dim(1) == d, errc::shape_mismatch,
          "sampler dimension does not match the encoder latent");
  bool standardized = tp.cond_mean.size() == d && tp.cond_scale.size() == d;
  Tensor out({mc, 2 * d});
  for (std::size_t i = 0; i < mc; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      double m = standardized ? tp.cond_mean[j] : 0.0;
      double s = standardized ? tp.cond_scale[j] : 1.0;
      out.at(i, j) = (latent[j] - m) / s;
      out.at(i, d + j) = (batch.samples.at(i, j) - m) / s;
    }
  }
  return out;
}

void save_pipeline(const TrainedPipeline& tp, const std::filesystem::path& dir) {
  CheckpointWriter w;
  save_ae(w, tp.ae);
  w.add("kpf.x_e", tp.kpf_model.x_e);
  w.add("kpf.k_inv", tp.kpf_model.k_inv);
  w.add("kpf.hyper",
        Tensor({3}, {static_cast<double>(tp.kpf_model.gamma),
                     static_cast<double>(tp.kpf_model.prior_dim),
                     tp.kpf_model.squared_kernel ? 1.0 : 0.0}));
  blstm::save_blstm(w, tp.lstm);
  w.add("norm.mean", Tensor({tp.stats.mean.size()}, tp.stats.mean));
  w.add("norm.stdev", Tensor({tp.stats.stdev.size()}, tp.stats.stdev));
  if (!tp.cond_mean.empty()) {
    w.add("cond.mean", Tensor({tp.cond_mean.size()}, tp.cond_mean));
    w.add("cond.scale", Tensor({tp.cond_scale.size()}, tp.cond_scale));
  }

  json meta;
  meta["config"] = json::parse(config_to_json(tp.config));
  meta["norm_channels"] = tp.stats.channels;
  meta["norm_dropped"] = tp.stats.dropped;
  meta["software_version"] = kVersion;
  w.set_meta(meta.dump());
  w.write(dir);
}

TrainedPipeline load_pipeline(const std::filesystem::path& dir) {
  CheckpointReader r(dir);
  TrainedPipeline tp;
  try {
    json meta = json::parse(r.meta_json());
    require(meta.contains("config") && meta.contains("norm_channels"),
            errc::incompatible_checkpoint, "checkpoint metadata lacks pipeline fields");
    tp.config = parse_config(meta.at("config").dump());
    tp.stats.channels = meta.at("norm_channels").get<std::vector<std::string>>();
    if (meta.contains("norm_dropped"))
      tp.stats.dropped = meta.at("norm_dropped").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    fail(errc::incompatible_checkpoint,
         std::string("checkpoint metadata is malformed: ") + e.what());
  }

  tp.ae = load_ae(r);
  tp.lstm = blstm::load_blstm(r);

  Tensor mean = r.get("norm.mean"), stdev = r.get("norm.stdev");
  require(mean.size() == tp.stats.channels.size() && stdev.size() == mean.size(),
          errc::incompatible_checkpoint, "normalization arrays do not match channel list");
  tp.stats.mean.assign(mean.data(), mean.data() + mean.size());
  tp.stats.stdev.assign(stdev.data(), stdev.data() + stdev.size());
  tp.ae.stats = tp.stats;

  const auto& names = r.names();
  if (std::find(names.begin(), names.end(), "cond.mean") != names.end()) {
    Tensor cm = r.get("cond.mean"), cs = r.get("cond.scale");
    require(cm.size() == tp.ae.config.latent_dim && cs.size() == cm.size(),
            errc::incompatible_checkpoint, "conditioning scale does not match the latent");
    tp.cond_mean.assign(cm.data(), cm.data() + cm.size());
    tp.cond_scale.assign(cs.data(), cs.data() + cs.size());
  }

  Tensor hyper = r.get("kpf.hyper");
  require(hyper.size() == 3, errc::incompatible_checkpoint, "sampler hyperparameter block");
  tp.kpf_model.x_e = r.get("kpf.x_e");
  tp.kpf_model.k_inv = r.get("kpf.k_inv");
  tp.kpf_model.gamma = static_cast<std::size_t>(hyper[0]);
  tp.kpf_model.prior_dim = static_cast<std::size_t>(hyper[1]);
  tp.kpf_model.squared_kernel = hyper[2] != 0.0;
  require(tp.kpf_model.x_e.rank() == 2 && tp.kpf_model.k_inv.rank() == 2 &&
              tp.kpf_model.k_inv.dim(0) == tp.kpf_model.x_e.dim(0) &&
              tp.kpf_model.k_inv.dim(1) == tp.kpf_model.x_e.dim(0),
          errc::incompatible_checkpoint, "sampler arrays have inconsistent shapes");

  // The Gram matrix is cheap to rebuild and keeps the model self-consistent.
  std::size_t n = tp.kpf_model.x_e.dim(0), d = tp.kpf_model.x_e.dim(1);
  Tensor k({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = tp.kpf_model.x_e.data() + i * d;
    for (std::size_t j = i; j < n; ++j) {
      double v = kpf::gaussian_kernel(xi, tp.kpf_model.x_e.data() + j * d, d,
                                      tp.kpf_model.squared_kernel);
      k.at(i, j) = v;
      k.at(j, i) = v;
    }
  }
  tp.kpf_model.k = std::move(k);
  return tp;
}

blstm::ForecastDistribution forecast_window(const TrainedPipeline& tp, const Tensor& window_kw,
                                            std::int64_t target_start_time, Rng& rng) {
  WindowSpec spec = effective_window_spec(tp.config);
  std::vector<std::string> in_ch = {kNetLoad};
  in_ch.insert(in_ch.end(), spec.channel_order.begin(), spec.channel_order.end());
  require(window_kw.rank() == 2 && window_kw.dim(0) == in_ch.size() &&
              window_kw.dim(1) == spec.t_win,
          errc::shape_mismatch, "forecast window must be [" + std::to_string(in_ch.size()) +
                                    ", " + std::to_string(spec.t_win) + "]");

  const NormStats& st = tp.stats;
  Tensor norm({st.channels.size(), spec.t_win});
  for (std::size_t c = 0; c < st.channels.size(); ++c) {
    auto row = std::find(in_ch.begin(), in_ch.end(), st.channels[c]);
    require(row != in_ch.end(), errc::shape_mismatch,
            "window lacks channel '" + st.channels[c] + "'");
    std::size_t src = static_cast<std::size_t>(row - in_ch.begin());
    for (std::size_t t = 0; t < spec.t_win; ++t)
      norm.at(c, t) = (window_kw.at(src, t) - st.mean[c]) / st.stdev[c];
  }

  Tensor z = tp.ae.encode(norm);
  kpf::SampleBatch batch = kpf::sample(tp.kpf_model, tp.config.blstm.mc_samples, rng);
  blstm::ForecastDistribution fc =
      blstm::forecast(tp.lstm, make_conditions(tp, z, batch), rng);

  fc.timestamps.resize(fc.mu_pred.size());
  for (std::size_t t = 0; t < fc.mu_pred.size(); ++t) {
    fc.timestamps[t] = target_start_time + static_cast<std::int64_t>(t) * kStepSeconds;
    fc.mu_pred[t] = denormalize_target(st, fc.mu_pred[t]);
    fc.sigma_pred[t] = denormalize_sigma(st, fc.sigma_pred[t]);
  }
  return fc;
}

metrics::EvalReport evaluate_split(const TrainedPipeline& tp, const WindowedDataset& raw,
                                   const std::string& split_label, std::uint64_t seed) {
  require(!raw.samples.empty(), errc::empty_dataset,
          "evaluation split '" + split_label + "' is empty");
  Rng root(seed);
  std::vector<double> mu, sigma, obs;
  std::vector<std::int64_t> ts;
  mu.reserve(raw.samples.size() * raw.horizon);
  sigma.reserve(mu.capacity());
  obs.reserve(mu.capacity());
  ts.reserve(mu.capacity());

  for (std::size_t i = 0; i < raw.samples.size(); ++i) {
    const WindowSample& s = raw.samples[i];
    Rng r = root.stream(i);
    blstm::ForecastDistribution fc = forecast_window(tp, s.input, s.target_start_time, r);
    for (std::size_t t = 0; t < fc.mu_pred.size(); ++t) {
      mu.push_back(fc.mu_pred[t]);
      sigma.push_back(fc.sigma_pred[t]);
      obs.push_back(s.target[t]);
      ts.push_back(fc.timestamps[t]);
    }
  }
  metrics::ReportOptions opts;
  opts.split_label = split_label;
  return metrics::seasonal_report(mu, sigma, obs, ts, opts);
}

std::filesystem::path cmd_synth(const PipelineConfig& cfg) {
  require(cfg.data.use_synth, errc::config_error,
          "synth requires a data.synth block in the config");
  SiteRecord site = synth_site(cfg.data.synth);
  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::path path = std::filesystem::path(cfg.out_dir) / (site.site_id + ".csv");
  save_csv(site, path);
  return path;
}

TrainOutcome cmd_train(const PipelineConfig& cfg, const std::string& csv_override) {
  SiteRecord site = load_site(cfg, csv_override);
  TrainedPipeline tp = train_pipeline(cfg, site);

  std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  TrainOutcome outcome;
  outcome.checkpoint_dir = out / "checkpoint";
  save_pipeline(tp, outcome.checkpoint_dir);

  // Deterministic metric summary over the held-out split.
  WindowedDataset all = window(site, effective_window_spec(cfg));
  auto [train_raw, test_raw] = interleaved_split(all, cfg.split);
  json metrics_json;
  if (!test_raw.samples.empty()) {
    outcome.test_report = evaluate_split(tp, test_raw, "test", derived_seed(cfg.seed, 4));
    metrics_json = json::parse(outcome.test_report.to_json());
  }

  json manifest;
  manifest["software_version"] = kVersion;
  manifest["config_hash"] = config_hash(cfg);
  manifest["checkpoint_dir"] = outcome.checkpoint_dir.string();
  manifest["stage_seconds"] = {
      {"autoencoder", tp.timings.ae}, {"sampler", tp.timings.kpf}, {"forecaster", tp.timings.blstm}};
  manifest["metrics"] = metrics_json;
  outcome.manifest_path = out / "run_manifest.json";
  write_atomic(outcome.manifest_path, manifest.dump(2) + "\n");
  return outcome;
}

std::filesystem::path cmd_forecast(const std::filesystem::path& checkpoint_dir,
                                   const std::string& csv_override,
                                   const std::filesystem::path& out_dir, std::uint64_t seed) {
  TrainedPipeline tp = load_pipeline(checkpoint_dir);
  SiteRecord site = load_site(tp.config, csv_override);
  WindowSpec spec = effective_window_spec(tp.config);
  require(site.length >= spec.t_win, errc::series_too_short,
          "need at least " + std::to_string(spec.t_win) + " steps to forecast");

  std::vector<std::string> in_ch = {kNetLoad};
  in_ch.insert(in_ch.end(), spec.channel_order.begin(), spec.channel_order.end());
  std::size_t first = site.length - spec.t_win;
  Tensor input({in_ch.size(), spec.t_win});
  for (std::size_t c = 0; c < in_ch.size(); ++c) {
    const Channel& ch = site.channel(in_ch[c]);
    for (std::size_t t = 0; t < spec.t_win; ++t) {
      require(!ch.missing[first + t], errc::out_of_range,
              "channel '" + in_ch[c] + "' has missing measurements inside the final window");
      input.at(c, t) = ch.values[first + t];
    }
  }

  Rng rng(seed);
  std::int64_t t0 = site.start_time + static_cast<std::int64_t>(site.length) * kStepSeconds;
  blstm::ForecastDistribution fc = forecast_window(tp, input, t0, rng);
  auto [lo50, hi50] = blstm::interval(fc, 50);
  auto [lo95, hi95] = blstm::interval(fc, 95);
  auto [lo99, hi99] = blstm::interval(fc, 99);

  std::filesystem::create_directories(out_dir);
  std::filesystem::path path = out_dir / "forecast.csv";
  std::string text = "timestamp,mu_kw,sigma_kw,lo50,hi50,lo95,hi95,lo99,hi99\n";
  char line[256];
  for (std::size_t t = 0; t < fc.mu_pred.size(); ++t) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  format_timestamp(fc.timestamps[t]).c_str(), fc.mu_pred[t], fc.sigma_pred[t],
                  lo50[t], hi50[t], lo95[t], hi95[t], lo99[t], hi99[t]);
    text += line;
  }
  write_atomic(path, text);
  return path;
}

metrics::EvalReport cmd_evaluate(const std::filesystem::path& checkpoint_dir,
                                 const std::string& csv_override, const std::string& split,
                                 const std::filesystem::path& out_dir, std::uint64_t seed) {
  require(split == "test" || split == "train", errc::config_error,
          "split must be 'train' or 'test', got '" + split + "'");
  TrainedPipeline tp = load_pipeline(checkpoint_dir);
  SiteRecord site = load_site(tp.config, csv_override);
  WindowedDataset all = window(site, effective_window_spec(tp.config));
  auto [train_raw, test_raw] = interleaved_split(all, tp.config.split);
  const WindowedDataset& chosen = split == "train" ? train_raw : test_raw;

  metrics::EvalReport report = evaluate_split(tp, chosen, split, seed);
  std::filesystem::create_directories(out_dir);
  write_atomic(out_dir / "report.json", report.to_json() + "\n");
  return report;
}

}  // namespace netcast::pipeline
