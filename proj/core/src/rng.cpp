#include "netcast/rng.hpp"

#include <cmath>
#include <numbers>

namespace netcast {

namespace {

// SplitMix64 finalizer: bijective 64-bit mix with good avalanche behaviour.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Rng Rng::stream(std::uint64_t id) const {
  // Children of distinct ids, and of distinct parents, must not collide:
  // fold the id through the mixer together with the parent identity.
  std::uint64_t child_key = mix64(key_ ^ mix64(stream_ + 0x632be59bd9b4e019ULL));
  return Rng(child_key, mix64(id + 0x9e3779b97f4a7c15ULL));
}

std::uint64_t Rng::next_u64() {
  std::uint64_t c = counter_++;
  return mix64(c ^ mix64(key_ ^ mix64(stream_)));
}

double Rng::uniform() {
  // 53 random bits, offset by half an ulp so 0 and 1 are both excluded.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_below(std::uint64_t bound) {
  // Rejection sampling over the largest multiple of bound below 2^64.
  std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % bound;
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor gaussian(Rng& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

}  // namespace netcast
