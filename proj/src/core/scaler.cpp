#include "fitgate/core/scaler.hpp"

#include <algorithm>
#include <cmath>

#include "fitgate/core/error.hpp"

namespace fitgate {

Scaler Scaler::fit(std::span<const double> rows, std::size_t dims) {
  if (dims == 0 || rows.empty() || rows.size() % dims != 0) {
    fail(ErrorCode::kEmptyInput, "scaler: no rows to fit");
  }
  const std::size_t n = rows.size() / dims;
  Scaler s;
  s.mean.assign(dims, 0.0);
  s.std.assign(dims, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) s.mean[d] += rows[i * dims + d];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dims; ++d) {
      const double v = rows[i * dims + d] - s.mean[d];
      s.std[d] += v * v;
    }
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(n)), 1e-8);
  return s;
}

void Scaler::apply(std::span<double> rows) const {
  const std::size_t dims = mean.size();
  if (dims == 0 || rows.size() % dims != 0) fail(ErrorCode::kDimensionMismatch, "scaler: row size mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t d = i % dims;
    rows[i] = (rows[i] - mean[d]) / std[d];
  }
}

}  // namespace fitgate
