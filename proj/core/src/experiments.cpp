#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netcast/pipeline.hpp"
#include "netcast/timeutil.hpp"

namespace netcast::pipeline {
namespace {

using nlohmann::json;

std::uint64_t lane_seed(std::uint64_t seed, std::uint64_t lane) {
  return Rng(seed).stream(lane).next_u64();
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

/// "count,mae_kw,mape_pct,pbb_pct,crps" cells; empty when the block is.
std::string block_cells(const metrics::MetricBlock& b) {
  if (b.count == 0) return "0,,,,";
  return std::to_string(b.count) + "," + num(b.mae_kw) + "," + num(b.mape_pct) + "," +
         num(b.pbb_pct) + "," + num(b.crps);
}

const char* kBlockHeader = "count,mae_kw,mape_pct,pbb_pct,crps";

void write_rows_csv(const std::filesystem::path& path, const std::string& key_header,
                    const std::vector<std::pair<std::string, const metrics::EvalReport*>>& rows) {
  std::string text = key_header + "," + kBlockHeader + ",winter_" +
                     "count,winter_mae_kw,winter_mape_pct,winter_pbb_pct,winter_crps," +
                     "summer_count,summer_mae_kw,summer_mape_pct,summer_pbb_pct,summer_crps\n";
  for (const auto& [key, report] : rows) {
    text += key + "," + block_cells(report->overall) + "," + block_cells(report->winter) +
            "," + block_cells(report->summer) + "\n";
  }
  std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), errc::io_error, "cannot write '" + path.string() + "'");
  f << text;
  require(f.good(), errc::io_error, "short write to '" + path.string() + "'");
}

std::string trim_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

metrics::EvalReport run_cell(const PipelineConfig& cfg, const SiteRecord& site) {
  TrainedPipeline tp = train_pipeline(cfg, site);
  WindowedDataset all = window(site, effective_window_spec(cfg));
  auto [train_raw, test_raw] = interleaved_split(all, cfg.split);
  return evaluate_split(tp, test_raw, "test", lane_seed(cfg.seed, 4));
}

/// Raw-unit input window [channels, t_win] ending just before `anchor`
/// (an index into the site's step grid); every step must be measured.
Tensor site_window(const SiteRecord& site, const WindowSpec& spec, std::size_t anchor) {
  require(anchor >= spec.t_win && anchor <= site.length, errc::out_of_range,
          "window does not fit before step " + std::to_string(anchor));
  std::vector<std::string> in_ch = {kNetLoad};
  in_ch.insert(in_ch.end(), spec.channel_order.begin(), spec.channel_order.end());
  Tensor out({in_ch.size(), spec.t_win});
  std::size_t first = anchor - spec.t_win;
  for (std::size_t c = 0; c < in_ch.size(); ++c) {
    const Channel& ch = site.channel(in_ch[c]);
    for (std::size_t t = 0; t < spec.t_win; ++t) {
      require(!ch.missing[first + t], errc::out_of_range,
              "channel '" + in_ch[c] + "' is missing inside the requested window");
      out.at(c, t) = ch.values[first + t];
    }
  }
  return out;
}

void append_track(blstm::ForecastDistribution& dst, const blstm::ForecastDistribution& src,
                  std::size_t take) {
  dst.mc_samples_used = src.mc_samples_used;
  for (std::size_t t = 0; t < take; ++t) {
    dst.timestamps.push_back(src.timestamps[t]);
    dst.mu_pred.push_back(src.mu_pred[t]);
    dst.sigma_pred.push_back(src.sigma_pred[t]);
  }
}

}  // namespace

std::vector<ExperimentRow> penetration_experiment(const PipelineConfig& base,
                                                  const std::vector<double>& penetrations,
                                                  const std::filesystem::path& out_dir) {
  require(base.data.use_synth, errc::config_error,
          "the penetration experiment synthesizes its sites; configure data.synth");
  std::vector<std::size_t> horizons = {1, base.window.horizon};
  if (horizons[1] == horizons[0]) horizons.pop_back();

  std::vector<ExperimentRow> rows;
  std::vector<std::pair<std::string, const metrics::EvalReport*>> csv;
  for (double p : penetrations) {
    require(p >= 0.0 && p < 1.0, errc::infeasible_penetration,
            "penetration target must lie in [0, 1)");
    for (std::size_t h : horizons) {
      PipelineConfig cfg = base;
      cfg.data.synth.solar_penetration_target = p;
      cfg.window.horizon = h;
      SiteRecord site = synth_site(cfg.data.synth);
      ExperimentRow row;
      row.label = trim_number(p * 100.0);
      row.horizon = h;
      row.report = run_cell(cfg, site);
      rows.push_back(std::move(row));
    }
  }
  for (const ExperimentRow& r : rows)
    csv.emplace_back(r.label + "," + std::to_string(r.horizon), &r.report);
  write_rows_csv(out_dir / "penetration.csv", "penetration_pct,horizon_steps", csv);
  return rows;
}

std::vector<ExperimentRow> aggregation_experiment(const PipelineConfig& base,
                                                  const std::vector<std::size_t>& sizes,
                                                  const std::filesystem::path& out_dir) {
  require(base.data.use_synth, errc::config_error,
          "the aggregation experiment synthesizes its sites; configure data.synth");
  std::vector<ExperimentRow> rows;
  for (std::size_t count : sizes) {
    require(count >= 1, errc::config_error, "aggregate size must be at least 1");
    std::vector<SiteRecord> sites;
    sites.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      SynthConfig sc = base.data.synth;
      sc.seed = base.data.synth.seed + i;  // independent weather/demand draws
      sc.site_id = "site_" + std::to_string(i);
      sites.push_back(synth_site(sc));
    }
    SiteRecord agg = count == 1 ? std::move(sites.front()) : aggregate(sites);
    ExperimentRow row;
    row.label = std::to_string(count);
    row.horizon = base.window.horizon;
    row.report = run_cell(base, agg);
    rows.push_back(std::move(row));
  }
  std::vector<std::pair<std::string, const metrics::EvalReport*>> csv;
  for (const ExperimentRow& r : rows) csv.emplace_back(r.label, &r.report);
  write_rows_csv(out_dir / "aggregation.csv", "site_count", csv);
  return rows;
}

MissingRunResult missing_experiment(const TrainedPipeline& tp, const SiteRecord& site,
                                    std::int64_t mask_start, std::size_t masked_steps,
                                    std::uint64_t seed) {
  WindowSpec spec = effective_window_spec(tp.config);
  const std::size_t H = spec.horizon, T = spec.t_win;
  require(masked_steps >= 1, errc::out_of_range, "nothing to mask");
  std::int64_t rel = mask_start - site.start_time;
  require(rel >= 0 && rel % kStepSeconds == 0, errc::out_of_range,
          "mask start is not on the series grid");
  std::size_t off = static_cast<std::size_t>(rel / kStepSeconds);
  require(off >= T, errc::series_too_short,
          "not enough history before the masked region for one input window");
  require(off + masked_steps <= site.length, errc::out_of_range,
          "masked region runs past the end of the series");

  const NormStats& st = tp.stats;
  std::size_t mc = tp.config.blstm.mc_samples;
  std::size_t d = tp.ae.config.latent_dim;
  std::vector<std::string> in_ch = {kNetLoad};
  in_ch.insert(in_ch.end(), spec.channel_order.begin(), spec.channel_order.end());
  const Channel& net = site.channel(kNetLoad);

  MissingRunResult res;
  res.timestamps.resize(masked_steps);
  res.obs_kw.resize(masked_steps);
  for (std::size_t k = 0; k < masked_steps; ++k) {
    res.timestamps[k] = mask_start + static_cast<std::int64_t>(k) * kStepSeconds;
    require(!net.missing[off + k], errc::out_of_range,
            "reference site is itself missing inside the masked region");
    res.obs_kw[k] = net.values[off + k];
  }

  // Complete-measurement track: ordinary rolling day-ahead forecasts.
  Rng complete_root = Rng(seed).stream(1);
  for (std::size_t r = 0; r * H < masked_steps; ++r) {
    std::size_t anchor = off + r * H;
    Rng rr = complete_root.stream(r);
    blstm::ForecastDistribution fc =
        forecast_window(tp, site_window(site, spec, anchor), res.timestamps[r * H], rr);
    append_track(res.complete, fc, std::min(H, masked_steps - r * H));
  }

  // Missing-measurement track: net_load is unavailable over the gap, so
  // each Monte-Carlo member feeds its own predicted means back in as the
  // windows roll forward; weather channels stay measured. Because the
  // imputed values are estimates, not measurements, the reported band adds
  // a first-order propagation of their own predictive uncertainty:
  // sigma_total^2 = sigma_mix^2 + p^2 with p the symmetric mean response to
  // shifting the imputed history one reported sigma up and down under
  // identical weight draws. Day one carries no imputed history, so its band
  // is the plain mixture.
  Rng missing_root = Rng(seed).stream(0);
  std::vector<std::vector<double>> imputed(mc, std::vector<double>(masked_steps, 0.0));
  std::vector<double> u(masked_steps, 0.0);  // reported sd per imputed step, normalized
  bool stdz = tp.cond_mean.size() == d && tp.cond_scale.size() == d;

  // Conditioning block with member i's imputed net levels shifted by
  // `shift` reported sigmas inside the already-imputed prefix [0, done).
  auto member_conditions = [&](std::size_t first, std::size_t done, double shift,
                               const kpf::SampleBatch& batch) {
    Tensor conditions({mc, 2 * d});
    for (std::size_t i = 0; i < mc; ++i) {
      Tensor norm({st.channels.size(), T});
      for (std::size_t c = 0; c < st.channels.size(); ++c) {
        auto it = std::find(in_ch.begin(), in_ch.end(), st.channels[c]);
        require(it != in_ch.end(), errc::shape_mismatch,
                "window lacks channel '" + st.channels[c] + "'");
        const Channel& ch = site.channel(*it);
        bool is_net = st.channels[c] == kNetLoad;
        for (std::size_t t = 0; t < T; ++t) {
          std::size_t step = first + t;
          double kw;
          if (is_net && step >= off && step < off + done) {
            std::size_t k = step - off;
            kw = imputed[i][k] + shift * u[k] * st.stdev[0];
          } else {
            require(!ch.missing[step], errc::out_of_range,
                    "channel '" + *it + "' is missing inside the rolling window");
            kw = ch.values[step];
          }
          norm.at(c, t) = (kw - st.mean[c]) / st.stdev[c];
        }
      }
      Tensor z = tp.ae.encode(norm);
      for (std::size_t j = 0; j < d; ++j) {
        double m = stdz ? tp.cond_mean[j] : 0.0;
        double s = stdz ? tp.cond_scale[j] : 1.0;
        conditions.at(i, j) = (z[j] - m) / s;
        conditions.at(i, d + j) = (batch.samples.at(i, j) - m) / s;
      }
    }
    return conditions;
  };

  for (std::size_t r = 0; r * H < masked_steps; ++r) {
    std::size_t anchor = off + r * H;
    std::size_t first = anchor - T;
    std::size_t done = r * H;
    Rng rr = missing_root.stream(r);
    kpf::SampleBatch batch = kpf::sample(tp.kpf_model, mc, rr);  // fresh draw per roll

    Rng central_rng = rr;
    auto [mus, sigmas] =
        blstm::forecast_members(tp.lstm, member_conditions(first, done, 0.0, batch),
                                central_rng);
    std::size_t take = std::min(H, masked_steps - r * H);

    std::vector<double> p(H, 0.0);
    if (done > 0) {
      Rng plus_rng = rr, minus_rng = rr;
      auto [mu_plus, sig_plus] = blstm::forecast_members(
          tp.lstm, member_conditions(first, done, +1.0, batch), plus_rng);
      auto [mu_minus, sig_minus] = blstm::forecast_members(
          tp.lstm, member_conditions(first, done, -1.0, batch), minus_rng);
      for (std::size_t t = 0; t < H; ++t) {
        double hi = 0.0, lo = 0.0;
        for (std::size_t i = 0; i < mc; ++i) {
          hi += mu_plus.at(i, t);
          lo += mu_minus.at(i, t);
        }
        p[t] = 0.5 * std::fabs(hi - lo) / static_cast<double>(mc);
      }
    }

    for (std::size_t i = 0; i < mc; ++i)
      for (std::size_t t = 0; t < take; ++t)
        imputed[i][done + t] = denormalize_target(st, mus.at(i, t));

    blstm::ForecastDistribution fc = blstm::mixture_from_members(mus, sigmas);
    fc.timestamps.resize(fc.mu_pred.size());
    for (std::size_t t = 0; t < fc.mu_pred.size(); ++t) {
      double total = std::sqrt(fc.sigma_pred[t] * fc.sigma_pred[t] + p[t] * p[t]);
      if (t < take) u[done + t] = total;
      fc.timestamps[t] = res.timestamps[r * H] + static_cast<std::int64_t>(t) * kStepSeconds;
      fc.mu_pred[t] = denormalize_target(st, fc.mu_pred[t]);
      fc.sigma_pred[t] = denormalize_sigma(st, total);
    }
    append_track(res.missing, fc, take);
  }
  return res;
}

void cmd_experiment(const std::string& name, const PipelineConfig& base,
                    const std::filesystem::path& out_dir) {
  if (name == "penetration") {
    penetration_experiment(base, {0.0, 0.10, 0.20, 0.36, 0.50}, out_dir);
    return;
  }
  if (name == "aggregation") {
    aggregation_experiment(base, {10, 40, 100}, out_dir);
    return;
  }
  if (name == "missing") {
    SiteRecord site = load_site(base);
    WindowSpec spec = effective_window_spec(base);
    const std::size_t day = 86400 / kStepSeconds;
    std::size_t masked_steps = 3 * day;
    require(site.length >= spec.t_win + masked_steps, errc::series_too_short,
            "series too short to mask three days after one input window");
    // Start the gap two-thirds through the series, on a day boundary.
    std::size_t off = std::min((site.length * 2) / 3, site.length - masked_steps);
    off -= off % day;
    if (off < spec.t_win) off = ((spec.t_win + day - 1) / day) * day;
    require(off + masked_steps <= site.length, errc::series_too_short,
            "series too short to place the masked region");
    std::int64_t mask_start =
        site.start_time + static_cast<std::int64_t>(off) * kStepSeconds;

    SiteRecord masked = mask_measurements(site, mask_start, masked_steps, {kNetLoad});
    TrainedPipeline tp = train_pipeline(base, masked);
    MissingRunResult res =
        missing_experiment(tp, site, mask_start, masked_steps, lane_seed(base.seed, 5));

    auto [mlo, mhi] = blstm::interval(res.missing, 95);
    auto [clo, chi] = blstm::interval(res.complete, 95);
    std::string text =
        "timestamp,obs_kw,missing_mu,missing_sigma,missing_lo95,missing_hi95,"
        "complete_mu,complete_sigma,complete_lo95,complete_hi95\n";
    char line[320];
    for (std::size_t k = 0; k < res.timestamps.size(); ++k) {
      std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    format_timestamp(res.timestamps[k]).c_str(), res.obs_kw[k],
                    res.missing.mu_pred[k], res.missing.sigma_pred[k], mlo[k], mhi[k],
                    res.complete.mu_pred[k], res.complete.sigma_pred[k], clo[k], chi[k]);
      text += line;
    }
    std::filesystem::create_directories(out_dir);
    std::ofstream f(out_dir / "missing.csv", std::ios::binary | std::ios::trunc);
    require(f.good(), errc::io_error, "cannot write missing.csv");
    f << text;

    json summary;
    std::size_t days = res.timestamps.size() / day;
    json widths_missing = json::array(), widths_complete = json::array();
    std::size_t narrower = 0;
    for (std::size_t k = 0; k < res.timestamps.size(); ++k)
      if (chi[k] - clo[k] <= mhi[k] - mlo[k]) ++narrower;
    for (std::size_t dd = 0; dd < days; ++dd) {
      double wm = 0.0, wc = 0.0;
      for (std::size_t k = dd * day; k < (dd + 1) * day; ++k) {
        wm += mhi[k] - mlo[k];
        wc += chi[k] - clo[k];
      }
      widths_missing.push_back(wm / static_cast<double>(day));
      widths_complete.push_back(wc / static_cast<double>(day));
    }
    summary["mask_start"] = format_timestamp(mask_start);
    summary["masked_steps"] = masked_steps;
    summary["imputation"] = "per-member rolling predicted means; weather channels kept";
    summary["band_variance"] = "member mixture plus first-order imputed-history propagation";
    summary["mean_band95_by_day_missing"] = widths_missing;
    summary["mean_band95_by_day_complete"] = widths_complete;
    summary["complete_narrower_fraction"] =
        static_cast<double>(narrower) / static_cast<double>(res.timestamps.size());
    std::ofstream sf(out_dir / "missing_summary.json", std::ios::binary | std::ios::trunc);
    require(sf.good(), errc::io_error, "cannot write missing_summary.json");
    sf << summary.dump(2) << "\n";
    return;
  }
  fail(errc::config_error,
       "unknown experiment '" + name + "' (expected penetration, aggregation, or missing)");
}

}  // namespace netcast::pipeline
