#include "netcast/errors.hpp"

namespace netcast {

const char* errc_name(errc c) {
  switch (c) {
    case errc::missing_column: return "MissingColumn";
    case errc::unparseable_timestamp: return "UnparseableTimestamp";
    case errc::duplicate_timestamp: return "DuplicateTimestamp";
    case errc::irregular_cadence: return "IrregularCadence";
    case errc::infeasible_penetration: return "InfeasiblePenetration";
    case errc::no_solar_channel: return "NoSolarChannel";
    case errc::zero_consumption: return "ZeroConsumption";
    case errc::empty_overlap: return "EmptyOverlap";
    case errc::series_too_short: return "SeriesTooShort";
    case errc::constant_channel: return "ConstantChannel";
    case errc::out_of_range: return "OutOfRange";
    case errc::shape_mismatch: return "ShapeMismatch";
    case errc::non_finite: return "NonFinite";
    case errc::empty_dataset: return "EmptyDataset";
    case errc::divergent_training: return "DivergentTraining";
    case errc::dim_mismatch: return "DimMismatch";
    case errc::bad_gamma: return "BadGamma";
    case errc::singular_system: return "SingularSystem";
    case errc::length_mismatch: return "LengthMismatch";
    case errc::non_monotone_cdf: return "NonMonotoneCdf";
    case errc::nonpositive_sigma: return "NonpositiveSigma";
    case errc::bad_level: return "BadLevel";
    case errc::incompatible_checkpoint: return "IncompatibleCheckpoint";
    case errc::config_error: return "ConfigError";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace netcast
