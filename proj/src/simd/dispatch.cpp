#include <cstdlib>
#include <string>

#include "clonecraft/core/error.hpp"
#include "clonecraft/simd/kernels.hpp"

namespace clonecraft::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa& active_slot() {
  static Isa isa = detect_isa();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) noexcept {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool isa_supported(Isa isa) noexcept {
  return isa == Isa::Scalar || cpu_has_avx2();
}

Isa detect_isa() noexcept {
  if (const char* env = std::getenv("CLONECRAFT_SIMD"); env && std::string(env) == "scalar") {
    return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

Isa active_isa() noexcept { return active_slot(); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw Error(Errc::ConfigError, std::string("ISA not supported on this CPU: ") +
                                       std::string(isa_name(isa)));
  }
  active_slot() = isa;
}

template <class T>
const KernelTable<T>& table_for(Isa isa) {
  return isa == Isa::Avx2 ? avx2::table<T>() : scalar::table<T>();
}

template <class T>
const KernelTable<T>& kernels() {
  return table_for<T>(active_slot());
}

template const KernelTable<float>& table_for<float>(Isa);
template const KernelTable<double>& table_for<double>(Isa);
template const KernelTable<float>& kernels<float>();
template const KernelTable<double>& kernels<double>();

}  // namespace clonecraft::simd
