#pragma once

#include <cstdint>

namespace gridbargain {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so any shard of a Monte Carlo run can be reproduced in isolation.
// The mixing function is the SplitMix64 finalizer (Steele, Lea, Flood 2014),
// applied twice: once to derive a per-stream key from (seed, stream) and once
// to the key combined with the counter.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    const std::uint64_t key = mix(seed_ ^ mix(stream));
    return mix(key + counter * 0xD1B54A32D192ED03ULL);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return static_cast<double>(bits(stream, counter) >> 11) * 0x1.0p-53;
  }

  constexpr std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace gridbargain
