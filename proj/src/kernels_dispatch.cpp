#include <atomic>
#include <cstdlib>
#include <cstring>

#include "crossview/errors.hpp"
#include "crossview/kernels.hpp"

namespace crossview::kernels {

namespace {

bool detect_avx2() {
#if defined(CROSSVIEW_AVX2_TU) && (defined(__x86_64__) || defined(_M_X64))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa pick_initial() {
  const bool avx2_ok = detect_avx2();
  if (const char* env = std::getenv("CROSSVIEW_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_ok) return Isa::avx2;
  }
  return avx2_ok ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa>& isa_slot() {
  static std::atomic<Isa> slot{pick_initial()};
  return slot;
}

}  // namespace

bool cpu_has_avx2() {
  static const bool has = detect_avx2();
  return has;
}

Isa active_isa() { return isa_slot().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2()) {
    throw ValidationError("AVX2 requested but not available on this CPU");
  }
  isa_slot().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if defined(CROSSVIEW_AVX2_TU)
#define CROSSVIEW_DISPATCH(fn, ...)            \
  if (active_isa() == Isa::avx2) {             \
    avx2::fn(__VA_ARGS__);                     \
  } else {                                     \
    scalar::fn(__VA_ARGS__);                   \
  }
#else
#define CROSSVIEW_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void gemm(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
          float* C, int ldc, bool accumulate) {
  CROSSVIEW_DISPATCH(gemm_f32, M, N, K, A, lda, B, ldb, C, ldc, accumulate)
}
void leaky_relu(const float* x, float* y, std::size_t n, float slope) {
  CROSSVIEW_DISPATCH(leaky_relu_f32, x, y, n, slope)
}
void leaky_relu_grad(const float* y, const float* dy, float* dx, std::size_t n, float slope) {
  CROSSVIEW_DISPATCH(leaky_relu_grad_f32, y, dy, dx, n, slope)
}
void tanh_grad(const float* y, const float* dy, float* dx, std::size_t n) {
  CROSSVIEW_DISPATCH(tanh_grad_f32, y, dy, dx, n)
}
void axpy(float a, const float* x, float* y, std::size_t n) {
  CROSSVIEW_DISPATCH(axpy_f32, a, x, y, n)
}
void add(const float* x, float* y, std::size_t n) {
  CROSSVIEW_DISPATCH(add_f32, x, y, n)
}
void scale(float* x, float a, std::size_t n) {
  CROSSVIEW_DISPATCH(scale_f32, x, a, n)
}
void adam_step(float* w, const float* g, float* m, float* v, std::size_t n,
               float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2) {
  CROSSVIEW_DISPATCH(adam_step_f32, w, g, m, v, n, lr, b1, b2, eps, inv_bc1, inv_bc2)
}

#undef CROSSVIEW_DISPATCH

}  // namespace crossview::kernels
