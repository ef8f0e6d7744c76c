#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "netcast/tensor.hpp"
#include "netcast/timeutil.hpp"

namespace netcast {

/// Canonical channel names used throughout the pipeline.
inline constexpr const char* kNetLoad = "net_load";
inline constexpr const char* kSolarPv = "solar_pv";
inline constexpr const char* kTemperature = "ambient_temperature";
inline constexpr const char* kHumidity = "relative_humidity";
inline constexpr const char* kApparentPower = "apparent_power";
inline constexpr const char* kWindDirection = "wind_direction";

struct Channel {
  std::vector<double> values;
  std::vector<char> missing;  // 1 where the value is absent

  std::size_t count_missing() const;
};

/// One site's multi-channel series on a strict 15-minute grid. Timestamps
/// are implicit: start_time + i * kStepSeconds.
struct SiteRecord {
  std::string site_id;
  std::int64_t start_time = 0;
  std::size_t length = 0;
  // Insertion-ordered channel map; net_load always present and first.
  std::vector<std::pair<std::string, Channel>> channels;

  std::int64_t timestamp(std::size_t i) const {
    return start_time + static_cast<std::int64_t>(i) * kStepSeconds;
  }
  bool has(const std::string& name) const;
  Channel& channel(const std::string& name);
  const Channel& channel(const std::string& name) const;
  Channel& add_channel(const std::string& name);
  std::vector<std::string> channel_names() const;
};

/// CSV column-name to channel-name mapping. Defaults follow the documented
/// schema: timestamp, net_load_kw, solar_pv_kw, temp_c, rh_pct,
/// apparent_kva, wind_deg.
struct CsvSchema {
  std::string timestamp_column = "timestamp";
  std::map<std::string, std::string> columns = {
      {"net_load_kw", kNetLoad},         {"solar_pv_kw", kSolarPv},
      {"temp_c", kTemperature},          {"rh_pct", kHumidity},
      {"apparent_kva", kApparentPower},  {"wind_deg", kWindDirection},
  };
};

/// Parse a CSV file onto the regular 15-minute grid. Rows are sorted by
/// timestamp, interior gaps become fully masked rows, unparseable or empty
/// value cells become masked entries.
SiteRecord load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Inverse of load_csv under the default schema; values printed to six
/// decimal places, masked entries as empty cells.
void save_csv(const SiteRecord& site, const std::filesystem::path& path);

struct SynthConfig {
  std::size_t days = 30;
  double solar_penetration_target = 0.0;  // in [0, 1)
  double base_load_kw = 2.0;
  double noise_sd = 0.2;  // stationary demand-noise standard deviation, kW
  std::uint64_t seed = 0;
  std::string site_id = "synthetic";
  std::int64_t start_time = days_from_civil(2021, 1, 1) * 86400;
};

/// Deterministic synthetic site: demand with diurnal/weekly/seasonal
/// structure coupled to generated weather, minus a solar series scaled so
/// the record's solar_penetration hits the target.
SiteRecord synth_site(const SynthConfig& cfg);

/// Share of gross consumption supplied by on-site solar:
/// sum(solar) / sum(net_load + solar) over steps where both are present.
double solar_penetration(const SiteRecord& site);

/// Sum power channels, average weather channels, over the sites' common
/// timestamp range. A step is masked only where every contributing site is
/// masked.
SiteRecord aggregate(const std::vector<SiteRecord>& sites);

struct WindowSpec {
  std::size_t t_win = 480;
  std::size_t horizon = 96;
  std::size_t stride = 1;
  // Auxiliary input channels, in order; net_load is always input row 0.
  std::vector<std::string> channel_order = {kTemperature, kHumidity};
};

struct WindowSample {
  Tensor input;   // [n_channels, t_win]
  Tensor target;  // [horizon] of net_load
  std::size_t start = 0;               // index of the first input step
  std::int64_t target_start_time = 0;  // timestamp of the first target step
};

struct WindowedDataset {
  std::vector<std::string> input_channels;  // net_load first
  std::size_t t_win = 0;
  std::size_t horizon = 0;
  std::vector<WindowSample> samples;

  std::size_t size() const { return samples.size(); }
};

/// Slide a (t_win, horizon) window over the series with the given stride.
/// Samples touching any masked value are dropped.
WindowedDataset window(const SiteRecord& site, const WindowSpec& spec);

struct SplitSpec {
  std::size_t train_blocks = 3;
  std::size_t test_blocks = 1;
};

/// Assign windows to train/test in repeating temporal blocks
/// (train_blocks then test_blocks, e.g. 3/1 for a ~75/25 split).
std::pair<WindowedDataset, WindowedDataset> interleaved_split(const WindowedDataset& ds,
                                                              const SplitSpec& spec);

struct NormStats {
  std::vector<std::string> channels;  // channels kept, net_load first
  std::vector<double> mean;
  std::vector<double> stdev;
  std::vector<std::string> dropped;  // constant channels removed with a warning

  double target_mean() const { return mean.front(); }
  double target_stdev() const { return stdev.front(); }
};

/// Z-score every input channel (and the net_load target) with statistics
/// from `stats` when given, else computed from `ds` itself and returned.
/// Constant auxiliary channels are dropped with a warning; a constant
/// net_load raises errc::constant_channel.
std::pair<WindowedDataset, NormStats> normalize(const WindowedDataset& ds,
                                                const std::optional<NormStats>& stats = {});

double denormalize_target(const NormStats& stats, double z);
double denormalize_sigma(const NormStats& stats, double sigma_z);
double normalize_target(const NormStats& stats, double kw);

/// Copy of `site` with the named channels masked over
/// [start, start + duration_steps).
SiteRecord mask_measurements(const SiteRecord& site, std::int64_t start,
                             std::size_t duration_steps,
                             const std::vector<std::string>& channel_names);

}  // namespace netcast
