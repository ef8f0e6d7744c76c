#pragma once

#include <stdexcept>
#include <string>

namespace netcast {

enum class errc {
  // data ingestion / preparation
  missing_column,
  unparseable_timestamp,
  duplicate_timestamp,
  irregular_cadence,
  infeasible_penetration,
  no_solar_channel,
  zero_consumption,
  empty_overlap,
  series_too_short,
  constant_channel,
  out_of_range,
  // tensor / training substrate
  shape_mismatch,
  non_finite,
  empty_dataset,
  divergent_training,
  // kernel sampler
  dim_mismatch,
  bad_gamma,
  singular_system,
  // metrics
  length_mismatch,
  non_monotone_cdf,
  nonpositive_sigma,
  bad_level,
  // io / configuration
  incompatible_checkpoint,
  config_error,
  io_error,
};

const char* errc_name(errc c);

/// All library failures surface as this exception; code() identifies the
/// contract that was violated, what() carries context.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace netcast
