#pragma once

#include <cstddef>
#include <cstdint>

namespace crossview::kernels {

// Runtime-selected instruction set for the float32 inner loops. The scalar
// path is the reference semantics; the AVX2 path reproduces it bit-for-bit:
// both accumulate each output element in ascending k order with fused
// multiply-adds, and both use only correctly-rounded IEEE ops (fma, sqrt,
// div), so equivalence tests can compare raw bits rather than tolerances.
// float64 always runs scalar (it only backs the double-precision gradient
// verification path, where throughput does not matter).
enum class Isa { scalar, avx2 };

Isa active_isa();
void force_isa(Isa isa);  // throws ValidationError if unsupported on this CPU
bool cpu_has_avx2();
const char* isa_name(Isa isa);

// C[M,N] = (accumulate ? C : 0) + A[M,K] * B[K,N], all row-major with leading
// dimensions lda/ldb/ldc. Per element: c = fma(A[m,k], B[k,n], c) for k
// ascending. Single-threaded; callers parallelize over disjoint outputs.
void gemm(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
          float* C, int ldc, bool accumulate);
void gemm(int M, int N, int K, const double* A, int lda, const double* B, int ldb,
          double* C, int ldc, bool accumulate);

// y = x > 0 ? x : slope * x   (slope 0 gives plain ReLU)
void leaky_relu(const float* x, float* y, std::size_t n, float slope);
void leaky_relu(const double* x, double* y, std::size_t n, double slope);
// dx = dy * (y > 0 ? 1 : slope); uses the forward output, valid for slope >= 0.
void leaky_relu_grad(const float* y, const float* dy, float* dx, std::size_t n, float slope);
void leaky_relu_grad(const double* y, const double* dy, double* dx, std::size_t n, double slope);

// Always scalar (libm): a vector polynomial would diverge from the reference.
void tanh_forward(const float* x, float* y, std::size_t n);
void tanh_forward(const double* x, double* y, std::size_t n);
// dx = dy * (1 - y^2)
void tanh_grad(const float* y, const float* dy, float* dx, std::size_t n);
void tanh_grad(const double* y, const double* dy, double* dx, std::size_t n);

// y += a * x
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
// y += x
void add(const float* x, float* y, std::size_t n);
void add(const double* x, double* y, std::size_t n);
void scale(float* x, float a, std::size_t n);
void scale(double* x, double a, std::size_t n);

// One Adam update over a parameter slab:
//   m = b1*m + (1-b1)*g
//   v = b2*v + (1-b2)*g*g
//   w -= lr * (m * inv_bc1) / (sqrt(v * inv_bc2) + eps)
// inv_bc1/inv_bc2 are the 1/(1-beta^t) bias corrections, precomputed by the
// caller in double and rounded once.
void adam_step(float* w, const float* g, float* m, float* v, std::size_t n,
               float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2);
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double b1, double b2, double eps, double inv_bc1, double inv_bc2);

// --- scalar reference entry points (bypass dispatch; used by equivalence tests)
namespace scalar {
void gemm_f32(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
              float* C, int ldc, bool accumulate);
void leaky_relu_f32(const float* x, float* y, std::size_t n, float slope);
void leaky_relu_grad_f32(const float* y, const float* dy, float* dx, std::size_t n, float slope);
void tanh_grad_f32(const float* y, const float* dy, float* dx, std::size_t n);
void axpy_f32(float a, const float* x, float* y, std::size_t n);
void add_f32(const float* x, float* y, std::size_t n);
void scale_f32(float* x, float a, std::size_t n);
void adam_step_f32(float* w, const float* g, float* m, float* v, std::size_t n,
                   float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2);
}  // namespace scalar

#if defined(CROSSVIEW_AVX2_TU) || defined(__x86_64__)
namespace avx2 {
void gemm_f32(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
              float* C, int ldc, bool accumulate);
void leaky_relu_f32(const float* x, float* y, std::size_t n, float slope);
void leaky_relu_grad_f32(const float* y, const float* dy, float* dx, std::size_t n, float slope);
void tanh_grad_f32(const float* y, const float* dy, float* dx, std::size_t n);
void axpy_f32(float a, const float* x, float* y, std::size_t n);
void add_f32(const float* x, float* y, std::size_t n);
void scale_f32(float* x, float a, std::size_t n);
void adam_step_f32(float* w, const float* g, float* m, float* v, std::size_t n,
                   float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2);
}  // namespace avx2
#endif

}  // namespace crossview::kernels
