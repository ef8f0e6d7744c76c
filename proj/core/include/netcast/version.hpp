#pragma once

namespace netcast {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever the on-disk checkpoint layout changes.
inline constexpr int kCheckpointFormatVersion = 1;

}  // namespace netcast
