#include <cmath>
#include <vector>

#include "../support/generators.hpp"
#include "doctest.h"
#include "fitgate/simd/kernels.hpp"

using namespace fitgate;
using namespace fitgate::simd;

namespace {

std::vector<const KernelTable*> vector_tables() {
  std::vector<const KernelTable*> out;
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (const KernelTable* t = table_for(isa)) out.push_back(t);
  }
  return out;
}

// Naive triple loop straight from the definition.
void gemm_oracle(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < g.k; ++p) {
        const double a = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
        const double b = g.trans_b ? g.b[j * g.ldb + p] : g.b[p * g.ldb + j];
        s += a * b;
      }
      double& c = g.c[i * g.ldc + j];
      c = g.accumulate ? c + s : s;
    }
  }
}

double abs_sum(const double* x, const double* y, std::size_t n) {
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(x[i] * y[i]);
  return s;
}

}  // namespace

TEST_CASE("scalar table is always available and named") {
  REQUIRE(table_for(Isa::kScalar) != nullptr);
  CHECK(isa_name(Isa::kScalar) == "scalar");
  CHECK(isa_name(active().isa).size() > 0);
}

TEST_CASE("scalar dot, axpy and squared distance follow their definitions") {
  const KernelTable& s = *table_for(Isa::kScalar);
  const std::vector<double> x{1, 2, 3}, y{4, -5, 6};
  CHECK(s.dot(x.data(), y.data(), 3) == 12.0);
  CHECK(s.squared_distance(x.data(), y.data(), 3) == 9.0 + 49.0 + 9.0);
  std::vector<double> z = y;
  s.axpy(2.0, x.data(), z.data(), 3);
  CHECK(z == std::vector<double>{6, -1, 12});
  CHECK(s.dot(x.data(), y.data(), 0) == 0.0);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const KernelTable& ref = *table_for(Isa::kScalar);
  RandomStream rng(11);
  for (const KernelTable* t : vector_tables()) {
    CAPTURE(isa_name(t->isa));
    for (int trial = 0; trial < 300; ++trial) {
      const auto n = static_cast<std::size_t>(testing::random_int(rng, 0, 257));
      const auto x = testing::random_vector(rng, n, -3, 3);
      const auto y = testing::random_vector(rng, n, -3, 3);
      const double bound = 4 * n * 1.2e-16 * abs_sum(x.data(), y.data(), n) + 1e-300;
      CHECK(std::abs(t->dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <= bound);

      double sq_bound = 0;
      for (std::size_t i = 0; i < n; ++i) sq_bound += (x[i] - y[i]) * (x[i] - y[i]);
      sq_bound *= 4 * n * 1.2e-16;
      CHECK(std::abs(t->squared_distance(x.data(), y.data(), n) - ref.squared_distance(x.data(), y.data(), n)) <=
            sq_bound + 1e-300);

      const double alpha = rng.uniform(-2, 2);
      auto y1 = y, y2 = y;
      t->axpy(alpha, x.data(), y1.data(), n);
      ref.axpy(alpha, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 4e-16 * (std::abs(alpha * x[i]) + std::abs(y[i])));
    }
  }
}

TEST_CASE("gemm variants agree with the triple-loop oracle for every transpose mode") {
  RandomStream rng(12);
  std::vector<const KernelTable*> tables = vector_tables();
  tables.push_back(table_for(Isa::kScalar));
  for (const KernelTable* t : tables) {
    CAPTURE(isa_name(t->isa));
    for (int trial = 0; trial < 120; ++trial) {
      GemmArgs g;
      // Include sizes that cross the blocking boundaries.
      const bool big = trial % 10 == 0;
      g.m = static_cast<std::size_t>(testing::random_int(rng, 1, big ? 130 : 17));
      g.n = static_cast<std::size_t>(testing::random_int(rng, 1, big ? 1100 : 29));
      g.k = static_cast<std::size_t>(testing::random_int(rng, 0, big ? 300 : 40));
      g.trans_a = rng.below(2) == 1;
      g.trans_b = rng.below(2) == 1;
      g.accumulate = rng.below(2) == 1;
      g.lda = (g.trans_a ? g.m : g.k) + rng.below(3);
      g.ldb = (g.trans_b ? g.k : g.n) + rng.below(3);
      g.ldc = g.n + rng.below(3);
      const auto a = testing::random_vector(rng, (g.trans_a ? g.k : g.m) * g.lda + 1);
      const auto b = testing::random_vector(rng, (g.trans_b ? g.n : g.k) * g.ldb + 1);
      auto c1 = testing::random_vector(rng, g.m * g.ldc);
      auto c2 = c1;
      g.a = a.data();
      g.b = b.data();
      GemmArgs g1 = g, g2 = g;
      g1.c = c1.data();
      g2.c = c2.data();
      t->gemm(g1);
      gemm_oracle(g2);
      const double tol = 4.0 * static_cast<double>(g.k + 2) * 1.2e-16 * static_cast<double>(g.k + 1);
      for (std::size_t i = 0; i < g.m; ++i) {
        for (std::size_t j = 0; j < g.ldc; ++j) {
          const std::size_t idx = i * g.ldc + j;
          if (j < g.n) {
            CHECK(std::abs(c1[idx] - c2[idx]) <= tol + 1e-14);
          } else {
            CHECK(c1[idx] == c2[idx]);  // padding columns untouched
          }
        }
      }
    }
  }
}
