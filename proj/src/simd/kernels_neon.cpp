// NEON (aarch64) variants. Only built on aarch64 targets.

#include <arm_neon.h>

#include <algorithm>

#include "fitgate/simd/kernels.hpp"

namespace fitgate::simd {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double sum = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double sum = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum;
}

// Row-broadcast GEMM; B rows are contiguous only when !trans_b, so the
// transposed case goes through a per-element gather.
void gemm_neon(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    double* c_row = g.c + i * g.ldc;
    if (!g.accumulate) std::fill_n(c_row, g.n, 0.0);
    for (std::size_t p = 0; p < g.k; ++p) {
      const double aip = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
      if (!g.trans_b) {
        axpy_neon(aip, g.b + p * g.ldb, c_row, g.n);
      } else {
        for (std::size_t j = 0; j < g.n; ++j) c_row[j] += aip * g.b[j * g.ldb + p];
      }
    }
  }
}

}  // namespace

namespace detail {
const KernelTable kNeonTable{Isa::kNeon, dot_neon, axpy_neon, squared_distance_neon, gemm_neon};
}  // namespace detail

}  // namespace fitgate::simd
