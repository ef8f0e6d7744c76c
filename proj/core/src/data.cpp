#include "netcast/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "netcast/mathfn.hpp"
#include "netcast/rng.hpp"

namespace netcast {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kYearDays = 365.25;

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  const char* begin = t.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + t.size() && std::isfinite(out);
}

}  // namespace

std::size_t Channel::count_missing() const {
  std::size_t n = 0;
  for (char m : missing) n += (m != 0);
  return n;
}

bool SiteRecord::has(const std::string& name) const {
  for (const auto& [n, c] : channels) {
    if (n == name) return true;
  }
  return false;
}

Channel& SiteRecord::channel(const std::string& name) {
  for (auto& [n, c] : channels) {
    if (n == name) return c;
  }
  fail(errc::missing_column, "site '" + site_id + "' has no channel '" + name + "'");
}

const Channel& SiteRecord::channel(const std::string& name) const {
  for (const auto& [n, c] : channels) {
    if (n == name) return c;
  }
  fail(errc::missing_column, "site '" + site_id + "' has no channel '" + name + "'");
}

Channel& SiteRecord::add_channel(const std::string& name) {
  channels.emplace_back(name, Channel{std::vector<double>(length, 0.0),
                                      std::vector<char>(length, 0)});
  return channels.back().second;
}

std::vector<std::string> SiteRecord::channel_names() const {
  std::vector<std::string> out;
  out.reserve(channels.size());
  for (const auto& [n, c] : channels) out.push_back(n);
  return out;
}

SiteRecord load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  require(in.good(), errc::io_error, "cannot open " + path.string());

  std::string header_line;
  require(static_cast<bool>(std::getline(in, header_line)), errc::missing_column,
          path.string() + " is empty (no header row)");
  std::vector<std::string> headers = split_csv_line(header_line);

  int ts_col = -1;
  // column index -> channel name, in header order
  std::vector<std::pair<int, std::string>> value_cols;
  for (std::size_t i = 0; i < headers.size(); ++i) {
    std::string h = trim(headers[i]);
    if (h == schema.timestamp_column) {
      ts_col = static_cast<int>(i);
    } else if (auto it = schema.columns.find(h); it != schema.columns.end()) {
      value_cols.emplace_back(static_cast<int>(i), it->second);
    }
  }
  require(ts_col >= 0, errc::missing_column,
          "no '" + schema.timestamp_column + "' column in " + path.string());
  bool has_net = false;
  for (const auto& [col, name] : value_cols) has_net = has_net || name == kNetLoad;
  require(has_net, errc::missing_column, "no net-load column in " + path.string());

  struct Row {
    std::int64_t ts;
    std::vector<double> vals;
    std::vector<char> miss;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    require(static_cast<std::size_t>(ts_col) < cells.size(), errc::unparseable_timestamp,
            "row with no timestamp cell in " + path.string());
    Row r;
    r.ts = parse_timestamp(trim(cells[ts_col]));
    r.vals.resize(value_cols.size(), 0.0);
    r.miss.resize(value_cols.size(), 1);
    for (std::size_t vi = 0; vi < value_cols.size(); ++vi) {
      int col = value_cols[vi].first;
      if (static_cast<std::size_t>(col) >= cells.size()) continue;
      double v;
      if (parse_double(cells[col], v)) {
        r.vals[vi] = v;
        r.miss[vi] = 0;
      }
    }
    rows.push_back(std::move(r));
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.ts < b.ts; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    require(rows[i].ts != rows[i - 1].ts, errc::duplicate_timestamp,
            "duplicate timestamp " + format_timestamp(rows[i].ts) + " in " + path.string());
    std::int64_t gap = rows[i].ts - rows[i - 1].ts;
    require(gap % kStepSeconds == 0, errc::irregular_cadence,
            "gap of " + std::to_string(gap) + " s before " + format_timestamp(rows[i].ts) +
                " is not a multiple of 15 minutes");
  }

  SiteRecord site;
  site.site_id = path.stem().string();
  if (rows.empty()) {
    site.length = 0;
  } else {
    site.start_time = rows.front().ts;
    site.length =
        static_cast<std::size_t>((rows.back().ts - rows.front().ts) / kStepSeconds) + 1;
  }
  // net_load first, then remaining channels in header order.
  site.add_channel(kNetLoad);
  for (const auto& [col, name] : value_cols) {
    if (name != kNetLoad && !site.has(name)) site.add_channel(name);
  }
  for (auto& [name, ch] : site.channels) ch.missing.assign(site.length, 1);
  for (const Row& r : rows) {
    std::size_t idx = static_cast<std::size_t>((r.ts - site.start_time) / kStepSeconds);
    for (std::size_t vi = 0; vi < value_cols.size(); ++vi) {
      Channel& ch = site.channel(value_cols[vi].second);
      ch.values[idx] = r.vals[vi];
      ch.missing[idx] = r.miss[vi];
    }
  }
  return site;
}

void save_csv(const SiteRecord& site, const std::filesystem::path& path) {
  // Canonical column order; only channels the record actually has.
  static const std::pair<const char*, const char*> kColumns[] = {
      {kNetLoad, "net_load_kw"},        {kSolarPv, "solar_pv_kw"},
      {kTemperature, "temp_c"},         {kHumidity, "rh_pct"},
      {kApparentPower, "apparent_kva"}, {kWindDirection, "wind_deg"},
  };
  std::vector<std::pair<const Channel*, const char*>> cols;
  for (const auto& [chan, col] : kColumns) {
    if (site.has(chan)) cols.emplace_back(&site.channel(chan), col);
  }
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path.string() + " for writing");
  out << "timestamp";
  for (const auto& [ch, col] : cols) out << ',' << col;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < site.length; ++i) {
    out << format_timestamp(site.timestamp(i));
    for (const auto& [ch, col] : cols) {
      out << ',';
      if (!ch->missing[i]) {
        std::snprintf(buf, sizeof buf, "%.6f", ch->values[i]);
        out << buf;
      }
    }
    out << '\n';
  }
  require(out.good(), errc::io_error, "short write to " + path.string());
}

SiteRecord synth_site(const SynthConfig& cfg) {
  require(cfg.days >= 1, errc::out_of_range, "synth_site needs at least one day");
  require(cfg.noise_sd >= 0.0, errc::out_of_range, "noise_sd must be non-negative");
  require(cfg.solar_penetration_target >= 0.0 && cfg.solar_penetration_target < 1.0,
          errc::infeasible_penetration,
          "solar penetration target must lie in [0, 1)");

  std::size_t n = cfg.days * 96;
  SiteRecord site;
  site.site_id = cfg.site_id;
  site.start_time = cfg.start_time;
  site.length = n;
  Channel& net = site.add_channel(kNetLoad);
  Channel& solar = site.add_channel(kSolarPv);
  Channel& temp = site.add_channel(kTemperature);
  Channel& hum = site.add_channel(kHumidity);
  Channel& app = site.add_channel(kApparentPower);
  Channel& wind = site.add_channel(kWindDirection);

  Rng root(cfg.seed);
  Rng rs_temp = root.stream(1);
  Rng rs_cloud = root.stream(2);
  Rng rs_demand = root.stream(3);
  Rng rs_hum = root.stream(4);
  Rng rs_wind = root.stream(5);
  Rng rs_app = root.stream(6);

  std::vector<double> demand(n), solar_raw(n);
  double ar_temp = 0.0, ar_hum = 0.0, ar_demand = 0.0, cloud = 0.0;
  double wind_state = 360.0 * rs_wind.uniform();
  // AR(1) with phi chosen so weather/noise persists across a window.
  const double phi_w = 0.9;
  const double innov_w = std::sqrt(1.0 - phi_w * phi_w);
  const double phi_cloud = 0.995;

  for (std::size_t i = 0; i < n; ++i) {
    std::int64_t ts = site.timestamp(i);
    double h = hour_fraction(ts);
    double doy = static_cast<double>(day_of_year(ts));
    int dow = weekday_of(ts);

    double season_temp = 12.0 - 10.0 * std::cos(kTwoPi * (doy - 201.0) / kYearDays);
    ar_temp = phi_w * ar_temp + 1.6 * innov_w * rs_temp.normal();
    double t_c = season_temp - 3.5 * std::cos(kTwoPi * (h - 14.5) / 24.0) + ar_temp;
    temp.values[i] = t_c;

    ar_hum = phi_w * ar_hum + 6.0 * innov_w * rs_hum.normal();
    hum.values[i] = std::clamp(78.0 - 1.1 * (t_c - 8.0) + ar_hum, 15.0, 100.0);

    double prof = 0.75 + 0.35 * std::exp(-0.5 * ((h - 8.0) / 2.2) * ((h - 8.0) / 2.2)) +
                  0.55 * std::exp(-0.5 * ((h - 19.0) / 2.8) * ((h - 19.0) / 2.8));
    double weekend = dow >= 5 ? 1.07 : 1.0;
    double season_d = 1.0 + 0.18 * std::cos(kTwoPi * (doy - 18.0) / kYearDays);
    double hvac = 0.045 * std::max(0.0, 15.5 - t_c) + 0.06 * std::max(0.0, t_c - 23.5);
    ar_demand = phi_w * ar_demand + cfg.noise_sd * innov_w * rs_demand.normal();
    demand[i] = std::max(cfg.base_load_kw * (prof * weekend * season_d + hvac) + ar_demand,
                         0.05 * cfg.base_load_kw);

    // Clear-sky bell squared, seasonal amplitude, slow cloud dimming.
    double half_width = 6.0 - 1.5 * std::cos(kTwoPi * (doy - 172.0) / kYearDays);
    double x = (h - 12.5) / half_width;
    double bell = std::fabs(x) < 1.0 ? std::cos(0.5 * std::numbers::pi * x) : 0.0;
    double amp = 0.8 - 0.35 * std::cos(kTwoPi * (doy - 172.0) / kYearDays);
    cloud = phi_cloud * cloud + 0.035 * rs_cloud.normal();
    double cloud_factor = 0.25 + 0.75 * sigmoid(2.5 * cloud);
    solar_raw[i] = bell * bell * amp * cloud_factor;

    wind_state += 15.0 * rs_wind.normal();
    wind.values[i] = wind_state - 360.0 * std::floor(wind_state / 360.0);
  }

  double sum_demand = 0.0, sum_solar_raw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_demand += demand[i];
    sum_solar_raw += solar_raw[i];
  }
  // Penetration = sum(solar)/sum(demand); scale the raw bell to hit it.
  double scale = cfg.solar_penetration_target == 0.0
                     ? 0.0
                     : cfg.solar_penetration_target * sum_demand / sum_solar_raw;
  for (std::size_t i = 0; i < n; ++i) {
    solar.values[i] = scale * solar_raw[i];
    net.values[i] = demand[i] - solar.values[i];
    app.values[i] = std::fabs(net.values[i]) / 0.95 * (1.0 + 0.015 * rs_app.normal());
  }
  return site;
}

double solar_penetration(const SiteRecord& site) {
  require(site.has(kSolarPv), errc::no_solar_channel,
          "site '" + site.site_id + "' has no solar channel");
  const Channel& solar = site.channel(kSolarPv);
  const Channel& net = site.channel(kNetLoad);
  const double dt_h = static_cast<double>(kStepSeconds) / 3600.0;
  double gen = 0.0, consumption = 0.0;
  for (std::size_t i = 0; i < site.length; ++i) {
    if (solar.missing[i] || net.missing[i]) continue;
    gen += solar.values[i] * dt_h;
    consumption += (net.values[i] + solar.values[i]) * dt_h;
  }
  require(consumption > 0.0, errc::zero_consumption,
          "total consumption is not positive");
  return gen / consumption;
}

SiteRecord aggregate(const std::vector<SiteRecord>& sites) {
  require(!sites.empty(), errc::empty_overlap, "aggregate of zero sites");
  std::int64_t start = sites.front().start_time;
  std::int64_t end = sites.front().timestamp(sites.front().length - 1);
  for (const SiteRecord& s : sites) {
    require(s.length > 0, errc::empty_overlap, "site '" + s.site_id + "' is empty");
    start = std::max(start, s.start_time);
    end = std::min(end, s.timestamp(s.length - 1));
  }
  require(end >= start, errc::empty_overlap, "sites share no timestamp range");
  std::size_t len = static_cast<std::size_t>((end - start) / kStepSeconds) + 1;

  SiteRecord out;
  out.site_id = "aggregate_" + std::to_string(sites.size());
  out.start_time = start;
  out.length = len;

  // Union of channel names, canonical power channels first.
  std::vector<std::string> names;
  auto add_name = [&names](const std::string& n) {
    if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  };
  add_name(kNetLoad);
  for (const SiteRecord& s : sites) {
    for (const auto& [n, c] : s.channels) add_name(n);
  }

  for (const std::string& name : names) {
    bool is_sum = name == kNetLoad || name == kSolarPv;
    Channel& ch = out.add_channel(name);
    for (std::size_t i = 0; i < len; ++i) {
      std::int64_t ts = start + static_cast<std::int64_t>(i) * kStepSeconds;
      double acc = 0.0;
      std::size_t contributors = 0;
      for (const SiteRecord& s : sites) {
        if (!s.has(name)) continue;
        std::size_t j = static_cast<std::size_t>((ts - s.start_time) / kStepSeconds);
        const Channel& sc = s.channel(name);
        if (sc.missing[j]) continue;
        acc += sc.values[j];
        ++contributors;
      }
      if (contributors == 0) {
        ch.missing[i] = 1;
      } else {
        ch.values[i] = is_sum ? acc : acc / static_cast<double>(contributors);
      }
    }
  }
  return out;
}

WindowedDataset window(const SiteRecord& site, const WindowSpec& spec) {
  require(spec.t_win >= 1 && spec.horizon >= 1 && spec.stride >= 1, errc::out_of_range,
          "window spec fields must be positive");
  require(site.length >= spec.t_win + spec.horizon, errc::series_too_short,
          "series of length " + std::to_string(site.length) + " cannot fit a window of " +
              std::to_string(spec.t_win + spec.horizon) + " steps");

  std::vector<const Channel*> chans;
  chans.push_back(&site.channel(kNetLoad));
  for (const std::string& name : spec.channel_order) chans.push_back(&site.channel(name));

  WindowedDataset ds;
  ds.input_channels.push_back(kNetLoad);
  for (const std::string& name : spec.channel_order) ds.input_channels.push_back(name);
  ds.t_win = spec.t_win;
  ds.horizon = spec.horizon;

  std::size_t count = (site.length - spec.t_win - spec.horizon) / spec.stride + 1;
  const Channel& net = *chans.front();
  for (std::size_t k = 0; k < count; ++k) {
    std::size_t start = k * spec.stride;
    bool masked = false;
    for (const Channel* ch : chans) {
      for (std::size_t t = start; t < start + spec.t_win && !masked; ++t) {
        masked = ch->missing[t] != 0;
      }
      if (masked) break;
    }
    for (std::size_t t = start + spec.t_win;
         t < start + spec.t_win + spec.horizon && !masked; ++t) {
      masked = net.missing[t] != 0;
    }
    if (masked) continue;

    WindowSample s;
    s.start = start;
    s.target_start_time = site.timestamp(start + spec.t_win);
    s.input = Tensor({chans.size(), spec.t_win});
    for (std::size_t c = 0; c < chans.size(); ++c) {
      for (std::size_t t = 0; t < spec.t_win; ++t) {
        s.input.at(c, t) = chans[c]->values[start + t];
      }
    }
    s.target = Tensor({spec.horizon});
    for (std::size_t t = 0; t < spec.horizon; ++t) {
      s.target[t] = net.values[start + spec.t_win + t];
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<WindowedDataset, WindowedDataset> interleaved_split(const WindowedDataset& ds,
                                                              const SplitSpec& spec) {
  require(spec.train_blocks >= 1 && spec.test_blocks >= 1, errc::out_of_range,
          "split block counts must be positive");
  require(!ds.samples.empty(), errc::empty_dataset, "cannot split an empty dataset");
  WindowedDataset train, test;
  train.input_channels = test.input_channels = ds.input_channels;
  train.t_win = test.t_win = ds.t_win;
  train.horizon = test.horizon = ds.horizon;
  std::size_t period = spec.train_blocks + spec.test_blocks;
  for (std::size_t k = 0; k < ds.samples.size(); ++k) {
    (k % period < spec.train_blocks ? train : test).samples.push_back(ds.samples[k]);
  }
  return {std::move(train), std::move(test)};
}

std::pair<WindowedDataset, NormStats> normalize(const WindowedDataset& ds,
                                                const std::optional<NormStats>& given) {
  require(!ds.samples.empty(), errc::empty_dataset, "cannot normalize an empty dataset");
  std::size_t n_ch = ds.input_channels.size();

  NormStats stats;
  if (given.has_value()) {
    stats = *given;
    // Every dataset channel must be accounted for, kept or dropped.
    for (const std::string& name : ds.input_channels) {
      bool kept = std::find(stats.channels.begin(), stats.channels.end(), name) !=
                  stats.channels.end();
      bool dropped = std::find(stats.dropped.begin(), stats.dropped.end(), name) !=
                     stats.dropped.end();
      require(kept || dropped, errc::shape_mismatch,
              "normalization statistics do not cover channel '" + name + "'");
    }
    for (const std::string& name : stats.channels) {
      require(std::find(ds.input_channels.begin(), ds.input_channels.end(), name) !=
                  ds.input_channels.end(),
              errc::shape_mismatch, "dataset lacks normalized channel '" + name + "'");
    }
  } else {
    for (std::size_t c = 0; c < n_ch; ++c) {
      double sum = 0.0, count = 0.0;
      for (const WindowSample& s : ds.samples) {
        for (std::size_t t = 0; t < ds.t_win; ++t) sum += s.input.at(c, t);
        count += static_cast<double>(ds.t_win);
      }
      double mean = sum / count;
      double ss = 0.0;
      for (const WindowSample& s : ds.samples) {
        for (std::size_t t = 0; t < ds.t_win; ++t) {
          double d = s.input.at(c, t) - mean;
          ss += d * d;
        }
      }
      double sd = std::sqrt(ss / count);
      if (sd < 1e-12) {
        require(ds.input_channels[c] != kNetLoad, errc::constant_channel,
                "net_load is constant; nothing to forecast");
        std::fprintf(stderr, "warning: dropping constant channel '%s'\n",
                     ds.input_channels[c].c_str());
        stats.dropped.push_back(ds.input_channels[c]);
      } else {
        stats.channels.push_back(ds.input_channels[c]);
        stats.mean.push_back(mean);
        stats.stdev.push_back(sd);
      }
    }
  }

  // Row index of each kept channel in the source inputs.
  std::vector<std::size_t> rows;
  for (const std::string& name : stats.channels) {
    for (std::size_t c = 0; c < n_ch; ++c) {
      if (ds.input_channels[c] == name) rows.push_back(c);
    }
  }

  WindowedDataset out;
  out.input_channels = stats.channels;
  out.t_win = ds.t_win;
  out.horizon = ds.horizon;
  out.samples.reserve(ds.samples.size());
  for (const WindowSample& s : ds.samples) {
    WindowSample ns;
    ns.start = s.start;
    ns.target_start_time = s.target_start_time;
    ns.input = Tensor({rows.size(), ds.t_win});
    for (std::size_t c = 0; c < rows.size(); ++c) {
      for (std::size_t t = 0; t < ds.t_win; ++t) {
        ns.input.at(c, t) = (s.input.at(rows[c], t) - stats.mean[c]) / stats.stdev[c];
      }
    }
    ns.target = Tensor({ds.horizon});
    for (std::size_t t = 0; t < ds.horizon; ++t) {
      ns.target[t] = (s.target[t] - stats.target_mean()) / stats.target_stdev();
    }
    out.samples.push_back(std::move(ns));
  }
  return {std::move(out), std::move(stats)};
}

double denormalize_target(const NormStats& stats, double z) {
  return z * stats.target_stdev() + stats.target_mean();
}

double denormalize_sigma(const NormStats& stats, double sigma_z) {
  return sigma_z * stats.target_stdev();
}

double normalize_target(const NormStats& stats, double kw) {
  return (kw - stats.target_mean()) / stats.target_stdev();
}

SiteRecord mask_measurements(const SiteRecord& site, std::int64_t start,
                             std::size_t duration_steps,
                             const std::vector<std::string>& channel_names) {
  std::int64_t off = start - site.start_time;
  require(off >= 0 && off % kStepSeconds == 0, errc::out_of_range,
          "mask start " + format_timestamp(start) + " is not on the series grid");
  std::size_t idx = static_cast<std::size_t>(off / kStepSeconds);
  require(idx + duration_steps <= site.length, errc::out_of_range,
          "mask interval extends past the end of the series");
  SiteRecord out = site;
  for (const std::string& name : channel_names) {
    Channel& ch = out.channel(name);
    for (std::size_t i = idx; i < idx + duration_steps; ++i) ch.missing[i] = 1;
  }
  return out;
}

}  // namespace netcast
