#include "fitgate/core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fitgate/core/error.hpp"

namespace fitgate {

Stats summarize(std::span<const double> values) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "summarize: empty sequence");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  Stats s;
  s.count = n;
  s.median = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  // Sums over the sorted copy so the result is independent of input order.
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(sq / static_cast<double>(n));
  return s;
}

double percentile(std::span<const double> values, double q) {
  if (values.empty()) fail(ErrorCode::kEmptyInput, "percentile: empty sequence");
  if (!(q >= 0.0 && q <= 100.0)) fail(ErrorCode::kDomain, "percentile: q outside [0,100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void to_json(nlohmann::json& j, const Stats& s) {
  j = nlohmann::json{{"median", s.median}, {"mean", s.mean}, {"std", s.std}, {"count", s.count}};
}

void from_json(const nlohmann::json& j, Stats& s) {
  j.at("median").get_to(s.median);
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std);
  j.at("count").get_to(s.count);
}

}  // namespace fitgate
