#include "codiff/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace codiff::kern {

extern const Ops kScalarOps;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops kAvx2Ops;
#endif

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& ops_for(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::Avx2) return kAvx2Ops;
#endif
  (void)b;
  return kScalarOps;
}

namespace {

Backend pick_default() {
  if (const char* env = std::getenv("CODIFF_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::Avx2;
  }
  return avx2_available() ? Backend::Avx2 : Backend::Scalar;
}

Backend g_backend = pick_default();

}  // namespace

const Ops& ops() { return ops_for(g_backend); }

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  g_backend = (b == Backend::Avx2 && !avx2_available()) ? Backend::Scalar : b;
}

}  // namespace codiff::kern
