#pragma once

#include <cstdint>
#include <vector>

#include "netcast/tensor.hpp"

namespace netcast {

/// Counter-based generator: every output is a pure function of (key, stream,
/// counter), so independent substreams can be split off without sharing
/// mutable state. Draw order inside one stream is still sequential.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_(seed), stream_(stream_id) {}

  /// Derive an independent substream; the child starts at counter 0.
  Rng stream(std::uint64_t id) const;

  std::uint64_t next_u64();

  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Uniform on [0, bound).
  std::uint64_t uniform_below(std::uint64_t bound);
  /// Standard normal via Box-Muller; consumes two u64 draws.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates; identical sequence for identical (key, stream, counter).
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

/// Tensor of i.i.d. standard normals drawn from `rng`.
Tensor gaussian(Rng& rng, std::vector<std::size_t> shape);

}  // namespace netcast
