#include <cstdlib>
#include <stdexcept>
#include <string>

#include "fitgate/simd/kernels.hpp"

namespace fitgate::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable* table_for(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return &detail::kScalarTable;
    case Isa::kAvx2:
#if defined(FITGATE_HAVE_AVX2)
      __builtin_cpu_init();
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return &detail::kAvx2Table;
      }
#endif
      return nullptr;
    case Isa::kNeon:
#if defined(FITGATE_HAVE_NEON)
      return &detail::kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

namespace {

const KernelTable& select_table() {
  if (const char* forced = std::getenv("FITGATE_KERNELS"); forced != nullptr && *forced != '\0') {
    const std::string name(forced);
    for (Isa isa : {Isa::kScalar, Isa::kAvx2, Isa::kNeon}) {
      if (name == isa_name(isa)) {
        if (const KernelTable* t = table_for(isa)) return *t;
        throw std::runtime_error("FITGATE_KERNELS=" + name + " is not supported on this host");
      }
    }
    throw std::runtime_error("FITGATE_KERNELS: unknown kernel set '" + name + "'");
  }
  for (Isa isa : {Isa::kAvx2, Isa::kNeon}) {
    if (const KernelTable* t = table_for(isa)) return *t;
  }
  return detail::kScalarTable;
}

}  // namespace

const KernelTable& active() {
  static const KernelTable& table = select_table();
  return table;
}

}  // namespace fitgate::simd
