#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace mfgnet::kernels {

namespace {

bool cpu_has_avx2() noexcept {
#if defined(MFGNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& resolve() noexcept {
  const char* env = std::getenv("MFGNET_KERNELS");
  const std::string_view wanted = env ? env : "";
  if (wanted == "scalar") return scalar_table();
  if (const auto* t = avx2_table()) return *t;
  return scalar_table();
}

}  // namespace

const KernelTable& scalar_table() noexcept {
  static const KernelTable table{"scalar", &detail::edge_hjb_scalar, &detail::dot_scalar};
  return table;
}

const KernelTable* avx2_table() noexcept {
#if defined(MFGNET_HAVE_AVX2)
  static const KernelTable table{"avx2", &detail::edge_hjb_avx2, &detail::dot_avx2};
  static const bool supported = cpu_has_avx2();
  return supported ? &table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace mfgnet::kernels
