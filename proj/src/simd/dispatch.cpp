#include <cstdlib>
#include <stdexcept>
#include <string>

#include "vtfuse/simd/kernels.hpp"

namespace vtf::simd {
namespace {

Backend select_backend() {
  if (const char* env = std::getenv("VTFUSE_SIMD"); env != nullptr && std::string(env) == "scalar")
    return Backend::scalar;
  if (backend_supported(Backend::avx2)) return Backend::avx2;
  return Backend::scalar;
}

}  // namespace

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(VTFUSE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels(Backend b) {
  if (!backend_supported(b)) throw std::runtime_error("SIMD backend not supported on this CPU");
#if defined(VTFUSE_HAVE_AVX2)
  if (b == Backend::avx2) return avx2_kernels();
#endif
  return scalar_kernels();
}

Backend active_backend() {
  static const Backend b = select_backend();
  return b;
}

const KernelTable& kernels() {
  static const KernelTable& table = kernels(active_backend());
  return table;
}

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

}  // namespace vtf::simd
