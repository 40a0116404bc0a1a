// AVX2 + FMA variants. This translation unit is compiled with -mavx2 -mfma and
// is only entered after the dispatcher has confirmed host support.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "fitgate/simd/kernels.hpp"

namespace fitgate::simd {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) sum += x[i] * y[i];
  return sum;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_distance_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double sum = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - y[i];
    sum += d * d;
  }
  return sum;
}

// Blocked GEMM with packed panels. The register tile is 4 rows by up to 12
// columns (three ymm accumulators per row); the layer shapes used by the
// classifier have row counts that are multiples of 4, and narrow column
// remainders get a 4- or 8-wide tile instead of padding to 12.
constexpr std::size_t kMr = 4;
constexpr std::size_t kNr = 12;
constexpr std::size_t kMc = 96;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 1020;

inline std::size_t panel_width(std::size_t remaining) {
  return remaining >= kNr ? kNr : (remaining + 3) / 4 * 4;
}

template <bool kTrans>
void pack_a(const double* a, std::size_t lda, std::size_t row0, std::size_t col0,
            std::size_t mc, std::size_t kc, double* out) {
  for (std::size_t ir = 0; ir < mc; ir += kMr) {
    const std::size_t rows = std::min(kMr, mc - ir);
    const std::size_t i0 = row0 + ir;
    if (rows == kMr) {
      for (std::size_t p = 0; p < kc; ++p) {
        const std::size_t k = col0 + p;
        for (std::size_t r = 0; r < kMr; ++r) out[r] = kTrans ? a[k * lda + i0 + r] : a[(i0 + r) * lda + k];
        out += kMr;
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const std::size_t k = col0 + p;
        for (std::size_t r = 0; r < kMr; ++r) {
          out[r] = r < rows ? (kTrans ? a[k * lda + i0 + r] : a[(i0 + r) * lda + k]) : 0.0;
        }
        out += kMr;
      }
    }
  }
}

template <bool kTrans>
void pack_b(const double* b, std::size_t ldb, std::size_t row0, std::size_t col0,
            std::size_t kc, std::size_t nc, double* out) {
  for (std::size_t jr = 0; jr < nc; jr += kNr) {
    const std::size_t w = panel_width(nc - jr);
    const std::size_t cols = std::min(w, nc - jr);
    if constexpr (kTrans) {
      for (std::size_t c = 0; c < w; ++c) {
        if (c < cols) {
          const double* src = b + (col0 + jr + c) * ldb + row0;
          for (std::size_t p = 0; p < kc; ++p) out[p * w + c] = src[p];
        } else {
          for (std::size_t p = 0; p < kc; ++p) out[p * w + c] = 0.0;
        }
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const double* src = b + (row0 + p) * ldb + col0 + jr;
        std::size_t c = 0;
        for (; c < cols; ++c) out[p * w + c] = src[c];
        for (; c < w; ++c) out[p * w + c] = 0.0;
      }
    }
    out += w * kc;
  }
}

template <int kVecs>
void micro_kernel(std::size_t kc, const double* ap, const double* bp, double* c,
                  std::size_t ldc, std::size_t rows, std::size_t cols, bool overwrite) {
  constexpr std::size_t w = 4 * kVecs;
  __m256d acc[kMr][kVecs];
  for (std::size_t r = 0; r < kMr; ++r) {
    for (int v = 0; v < kVecs; ++v) acc[r][v] = _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    __m256d bv[kVecs];
    for (int v = 0; v < kVecs; ++v) bv[v] = _mm256_loadu_pd(bp + 4 * v);
    for (std::size_t r = 0; r < kMr; ++r) {
      const __m256d av = _mm256_broadcast_sd(ap + r);
      for (int v = 0; v < kVecs; ++v) acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
    }
    ap += kMr;
    bp += w;
  }
  if (rows == kMr && cols == w) {
    for (std::size_t r = 0; r < kMr; ++r) {
      double* dst = c + r * ldc;
      for (int v = 0; v < kVecs; ++v) {
        if (overwrite) {
          _mm256_storeu_pd(dst + 4 * v, acc[r][v]);
        } else {
          _mm256_storeu_pd(dst + 4 * v, _mm256_add_pd(_mm256_loadu_pd(dst + 4 * v), acc[r][v]));
        }
      }
    }
    return;
  }
  alignas(32) double tile[kMr * w];
  for (std::size_t r = 0; r < kMr; ++r) {
    for (int v = 0; v < kVecs; ++v) _mm256_store_pd(tile + r * w + 4 * v, acc[r][v]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double* dst = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) {
      dst[j] = overwrite ? tile[r * w + j] : dst[j] + tile[r * w + j];
    }
  }
}

void gemm_avx2(const GemmArgs& g) {
  if (g.m == 0 || g.n == 0) return;
  if (g.k == 0) {
    if (!g.accumulate) {
      for (std::size_t i = 0; i < g.m; ++i) std::fill_n(g.c + i * g.ldc, g.n, 0.0);
    }
    return;
  }
  thread_local std::vector<double> a_pack;
  thread_local std::vector<double> b_pack;
  a_pack.resize(kMc * kKc);
  b_pack.resize(kNc * kKc);

  for (std::size_t jc = 0; jc < g.n; jc += kNc) {
    const std::size_t nc = std::min(kNc, g.n - jc);
    for (std::size_t pc = 0; pc < g.k; pc += kKc) {
      const std::size_t kc = std::min(kKc, g.k - pc);
      const bool overwrite = !g.accumulate && pc == 0;
      if (g.trans_b) {
        pack_b<true>(g.b, g.ldb, pc, jc, kc, nc, b_pack.data());
      } else {
        pack_b<false>(g.b, g.ldb, pc, jc, kc, nc, b_pack.data());
      }
      for (std::size_t ic = 0; ic < g.m; ic += kMc) {
        const std::size_t mc = std::min(kMc, g.m - ic);
        if (g.trans_a) {
          pack_a<true>(g.a, g.lda, ic, pc, mc, kc, a_pack.data());
        } else {
          pack_a<false>(g.a, g.lda, ic, pc, mc, kc, a_pack.data());
        }
        const double* bp = b_pack.data();
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t w = panel_width(nc - jr);
          const std::size_t cols = std::min(w, nc - jr);
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const double* ap = a_pack.data() + ir * kc;
            const std::size_t rows = std::min(kMr, mc - ir);
            double* c = g.c + (ic + ir) * g.ldc + jc + jr;
            switch (w) {
              case 12: micro_kernel<3>(kc, ap, bp, c, g.ldc, rows, cols, overwrite); break;
              case 8: micro_kernel<2>(kc, ap, bp, c, g.ldc, rows, cols, overwrite); break;
              default: micro_kernel<1>(kc, ap, bp, c, g.ldc, rows, cols, overwrite); break;
            }
          }
          bp += w * kc;
        }
      }
    }
  }
}

}  // namespace

namespace detail {
const KernelTable kAvx2Table{Isa::kAvx2, dot_avx2, axpy_avx2, squared_distance_avx2, gemm_avx2};
}  // namespace detail

}  // namespace fitgate::simd
