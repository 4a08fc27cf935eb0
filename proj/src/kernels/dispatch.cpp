#include <atomic>
#include <cstdlib>
#include <string_view>

#include "alseg/kernels.hpp"

namespace alseg::kernels {
namespace {

bool cpu_has_avx2_fma() noexcept {
#if defined(ALSEG_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& choose() noexcept {
  const KernelTable* avx2 = avx2_table();
  if (const char* env = std::getenv("ALSEG_KERNELS")) {
    const std::string_view want{env};
    if (want == "scalar") return scalar_table();
    if (want == "avx2" && avx2 != nullptr) return *avx2;
  }
  return avx2 != nullptr ? *avx2 : scalar_table();
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> table{&choose()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if defined(ALSEG_HAVE_AVX2_KERNELS)
  static const bool supported = cpu_has_avx2_fma();
  return supported ? &detail::avx2_table_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_relaxed); }

const KernelTable& set_active(const KernelTable& table) noexcept {
  return *slot().exchange(&table, std::memory_order_relaxed);
}

}  // namespace alseg::kernels
