#pragma once

#include <cstdint>

namespace tgx {

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// SplitMix64: tiny, portable, and identical on every platform, which keeps
// generated weights and datasets byte-reproducible.
class SplitMix64 {
public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }
  // Uniform in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  constexpr bool bernoulli(double p) { return uniform() < p; }
  constexpr std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
  std::uint64_t state_;
};

// Independent stream for a (seed, a, b) key, e.g. (run seed, snapshot, sample).
inline constexpr SplitMix64 keyed_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return SplitMix64(mix64(mix64(mix64(seed) ^ (a + 0x632be59bd9b4e019ULL)) ^ (b + 0x8cb92ba72f3d8dd7ULL)));
}

}  // namespace tgx
