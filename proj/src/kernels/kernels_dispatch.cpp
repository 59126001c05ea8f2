#include "stochopf/kernels.hpp"

namespace stochopf::kernels {

#ifdef STOCHOPF_HAVE_AVX2
const Backend* avx2_backend_impl();
#endif

const Backend* avx2_backend() {
#ifdef STOCHOPF_HAVE_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    return avx2_backend_impl();
  }
#endif
  return nullptr;
}

namespace {
const Backend* g_active = nullptr;
}

const Backend& active() {
  if (g_active == nullptr) {
    const Backend* avx2 = avx2_backend();
    g_active = avx2 != nullptr ? avx2 : &scalar_backend();
  }
  return *g_active;
}

void use(const Backend& backend) { g_active = &backend; }

}  // namespace stochopf::kernels
