#pragma once

// Data-parallel double-precision kernels used by the numeric modules.
//
// Every kernel has a scalar reference implementation. Vector variants (AVX2+FMA
// on x86-64, NEON on aarch64) are selected once at runtime; the environment
// variable FITGATE_KERNELS=scalar|avx2|neon forces a specific table. Variants
// agree with the reference up to floating-point reassociation, which the
// equivalence tests bound explicitly.

#include <cstddef>
#include <string_view>

namespace fitgate::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

// Row-major GEMM: C(m x n) = [C +] op(A)(m x k) * op(B)(k x n).
// With trans_a, A is stored k x m (element (i,p) at a[p*lda + i]).
// With trans_b, B is stored n x k (element (p,j) at b[j*ldb + p]).
struct GemmArgs {
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  const double* a = nullptr;
  std::size_t lda = 0;
  bool trans_a = false;
  const double* b = nullptr;
  std::size_t ldb = 0;
  bool trans_b = false;
  double* c = nullptr;
  std::size_t ldc = 0;
  bool accumulate = false;
};

struct KernelTable {
  Isa isa;
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* x, const double* y, std::size_t n);
  void (*gemm)(const GemmArgs& args);
};

// Table for a specific ISA, or nullptr when this build/host cannot run it.
const KernelTable* table_for(Isa isa);

// Best table supported by the host, honouring FITGATE_KERNELS.
const KernelTable& active();

inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline double squared_distance(const double* x, const double* y, std::size_t n) {
  return active().squared_distance(x, y, n);
}
inline void gemm(const GemmArgs& args) { active().gemm(args); }

namespace detail {
extern const KernelTable kScalarTable;
#if defined(FITGATE_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif
#if defined(FITGATE_HAVE_NEON)
extern const KernelTable kNeonTable;
#endif
}  // namespace detail

}  // namespace fitgate::simd
