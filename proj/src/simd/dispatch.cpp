#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "porflow/simd/kernels.hpp"

namespace porflow::simd {

extern const KernelTable kScalarTable;
#ifdef PORFLOW_HAVE_AVX2_TU
extern const KernelTable kAvx2Table;
#endif

namespace {

Isa detect() noexcept {
  if (const char* env = std::getenv("PORFLOW_SIMD"); env != nullptr && std::string(env) == "scalar")
    return Isa::Scalar;
  return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<int>& current() {
  static std::atomic<int> isa{static_cast<int>(detect())};
  return isa;
}

}  // namespace

const char* to_string(Isa isa) noexcept { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) noexcept {
  if (isa == Isa::Scalar) return true;
#if defined(PORFLOW_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() noexcept { return static_cast<Isa>(current().load(std::memory_order_relaxed)); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa))
    throw std::invalid_argument(std::string("ISA not supported on this CPU: ") + to_string(isa));
  current().store(static_cast<int>(isa), std::memory_order_relaxed);
}

const KernelTable& table(Isa isa) {
#ifdef PORFLOW_HAVE_AVX2_TU
  if (isa == Isa::Avx2) return kAvx2Table;
#endif
  (void)isa;
  return kScalarTable;
}

}  // namespace porflow::simd
