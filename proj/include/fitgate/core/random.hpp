#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace fitgate {

// SplitMix64 generator. A RandomStream is a plain value: copying it forks an
// identical stream, so parallel work derives independent streams with
// derive_stream() instead of sharing one.
class RandomStream {
 public:
  constexpr RandomStream() = default;
  constexpr explicit RandomStream(std::uint64_t state) : state_(state) {}

  constexpr std::uint64_t state() const noexcept { return state_; }

  constexpr std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // value / 2^64, in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Box-Muller on two consecutive uniforms; the sine branch is discarded.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }
  // Uniform integer in [0, n) by multiply-shift on a 64-bit draw.
  std::uint64_t below(std::uint64_t n) noexcept;

  friend constexpr bool operator==(const RandomStream&, const RandomStream&) = default;

 private:
  std::uint64_t state_ = 0;
};

// Pure form: (value, next stream).
constexpr std::pair<std::uint64_t, RandomStream> rng_next(RandomStream stream) noexcept {
  const std::uint64_t value = stream.next_u64();
  return {value, stream};
}

// Stream for item `index` of a job seeded with `seed`: the state is the first
// SplitMix64 output of (seed + index).
constexpr RandomStream derive_stream(std::uint64_t seed, std::uint64_t index) noexcept {
  return RandomStream(rng_next(RandomStream(seed + index)).first);
}

// Fisher-Yates shuffle of 0..n-1 driven by the stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng);

}  // namespace fitgate
