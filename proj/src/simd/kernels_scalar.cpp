#include "fitgate/simd/kernels.hpp"

namespace fitgate::simd {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_scalar(const double* x, const double* y, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum;
}

void gemm_scalar(const GemmArgs& g) {
  auto a_at = [&](std::size_t i, std::size_t p) {
    return g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
  };
  auto b_at = [&](std::size_t p, std::size_t j) {
    return g.trans_b ? g.b[j * g.ldb + p] : g.b[p * g.ldb + j];
  };
  for (std::size_t i = 0; i < g.m; ++i) {
    double* c_row = g.c + i * g.ldc;
    if (!g.accumulate) {
      for (std::size_t j = 0; j < g.n; ++j) c_row[j] = 0.0;
    }
    for (std::size_t p = 0; p < g.k; ++p) {
      const double aip = a_at(i, p);
      if (aip == 0.0) continue;
      for (std::size_t j = 0; j < g.n; ++j) c_row[j] += aip * b_at(p, j);
    }
  }
}

}  // namespace

namespace detail {
const KernelTable kScalarTable{Isa::kScalar, dot_scalar, axpy_scalar,
                               squared_distance_scalar, gemm_scalar};
}  // namespace detail

}  // namespace fitgate::simd
