#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fitgate {

// Per-dimension standardisation fitted on training rows only.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;

  // Population std per dimension with a 1e-8 floor. `rows` is row-major with
  // `dims` columns.
  static Scaler fit(std::span<const double> rows, std::size_t dims);
  void apply(std::span<double> rows) const;
  std::size_t dims() const noexcept { return mean.size(); }
};

}  // namespace fitgate
