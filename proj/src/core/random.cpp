#include "fitgate/core/random.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace fitgate {

double RandomStream::uniform() noexcept {
  // Values within 2^10 of 2^64 round to exactly 1.0 in double precision.
  const double u = static_cast<double>(next_u64()) * 0x1.0p-64;
  return u < 1.0 ? u : 0x1.fffffffffffffp-1;
}

double RandomStream::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::below(std::uint64_t n) noexcept {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RandomStream& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace fitgate
