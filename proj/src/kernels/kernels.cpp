#include "mpnp/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

namespace mpnp::kernels {

#ifndef MPNP_HAVE_AVX2_LANE
const Ops* avx2() { return nullptr; }
#endif

namespace {

const Ops* resolve() {
  const char* pref = std::getenv("MPNP_KERNELS");
  if (pref && std::strcmp(pref, "scalar") == 0) return &scalar();
  if (pref && std::strcmp(pref, "avx2") == 0 && avx2()) return avx2();
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2() && __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2();
#endif
  return &scalar();
}

}  // namespace

const Ops& ops() {
  static const Ops* active = resolve();
  return *active;
}

}  // namespace mpnp::kernels
