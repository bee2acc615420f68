#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace tropattn {

// Counter-based generator: every draw is a pure function of
// (seed, stream, index, lane), so parallel consumers see the same numbers no
// matter how work is split. Mixing is two rounds of the SplitMix64 finalizer.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Derived generator for an independent sub-stream.
  CounterRng split(std::uint64_t child) const {
    return CounterRng(mix(seed_ ^ mix(stream_ + 0x9E3779B97F4A7C15ULL * (child + 1))),
                      child);
  }

  std::uint64_t bits(std::uint64_t index, std::uint64_t lane = 0) const {
    std::uint64_t h = mix(seed_ + 0x9E3779B97F4A7C15ULL);
    h = mix(h ^ (stream_ * 0xD1B54A32D192ED03ULL));
    h = mix(h ^ (index * 0xBF58476D1CE4E5B9ULL + 0x94D049BB133111EBULL));
    return mix(h ^ (lane * 0x94D049BB133111EBULL + 0x2545F4914F6CDD1DULL));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform(std::uint64_t index, std::uint64_t lane = 0) const {
    return static_cast<double>(bits(index, lane) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t index, std::uint64_t lane, double lo, double hi) const {
    return lo + (hi - lo) * uniform(index, lane);
  }

  // Standard normal via Box-Muller on lanes (2*lane, 2*lane+1).
  double normal(std::uint64_t index, std::uint64_t lane = 0) const {
    const double u1 = (static_cast<double>(bits(index, 2 * lane) >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = uniform(index, 2 * lane + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
};

}  // namespace tropattn
