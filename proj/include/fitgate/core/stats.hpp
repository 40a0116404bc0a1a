#pragma once

#include <cstddef>
#include <span>

#include "json.hpp"

namespace fitgate {

// Median / mean / population std summary, as reported in the quality and
// confidence tables.
struct Stats {
  double median = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

// Throws kEmptyInput on an empty sequence.
Stats summarize(std::span<const double> values);

// Linear-interpolated percentile (q in [0,100]) of a non-empty sequence.
double percentile(std::span<const double> values, double q);

void to_json(nlohmann::json& j, const Stats& s);
void from_json(const nlohmann::json& j, Stats& s);

}  // namespace fitgate
