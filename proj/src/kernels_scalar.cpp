// Reference kernels. These define the numeric semantics of the project:
// every SIMD variant must reproduce them bit-for-bit on the same inputs.
// Multiplies that accumulate are spelled std::fma on purpose; the build also
// disables -ffp-contract so nothing else gets fused implicitly.

#include <cmath>

#include "crossview/kernels.hpp"

namespace crossview::kernels {

namespace {

// Blocked i-k-j loop: good locality on row-major B and C while keeping each
// C[m,n] accumulated in plain ascending-k order.
template <typename T>
void gemm_impl(int M, int N, int K, const T* A, int lda, const T* B, int ldb,
               T* C, int ldc, bool accumulate) {
  constexpr int kNB = 256;
  for (int n0 = 0; n0 < N; n0 += kNB) {
    const int n1 = n0 + kNB < N ? n0 + kNB : N;
    for (int m = 0; m < M; ++m) {
      T* c = C + static_cast<std::size_t>(m) * ldc;
      if (!accumulate) {
        for (int n = n0; n < n1; ++n) c[n] = T(0);
      }
      const T* a = A + static_cast<std::size_t>(m) * lda;
      for (int k = 0; k < K; ++k) {
        const T av = a[k];
        const T* b = B + static_cast<std::size_t>(k) * ldb;
        for (int n = n0; n < n1; ++n) {
          c[n] = std::fma(av, b[n], c[n]);
        }
      }
    }
  }
}

template <typename T>
void leaky_relu_impl(const T* x, T* y, std::size_t n, T slope) {
  for (std::size_t i = 0; i < n; ++i) {
    const T v = x[i];
    y[i] = v > T(0) ? v : slope * v;
  }
}

template <typename T>
void leaky_relu_grad_impl(const T* y, const T* dy, T* dx, std::size_t n, T slope) {
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = y[i] > T(0) ? dy[i] : slope * dy[i];
  }
}

template <typename T>
void tanh_grad_impl(const T* y, const T* dy, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dx[i] = dy[i] * (T(1) - y[i] * y[i]);
  }
}

template <typename T>
void adam_step_impl(T* w, const T* g, T* m, T* v, std::size_t n, T lr, T b1, T b2,
                    T eps, T inv_bc1, T inv_bc2) {
  const T one_minus_b1 = T(1) - b1;
  const T one_minus_b2 = T(1) - b2;
  for (std::size_t i = 0; i < n; ++i) {
    const T gi = g[i];
    const T mi = b1 * m[i] + one_minus_b1 * gi;
    const T vi = b2 * v[i] + one_minus_b2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const T num = lr * (mi * inv_bc1);
    const T den = std::sqrt(vi * inv_bc2) + eps;
    w[i] = w[i] - num / den;
  }
}

}  // namespace

namespace scalar {

void gemm_f32(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
              float* C, int ldc, bool accumulate) {
  gemm_impl(M, N, K, A, lda, B, ldb, C, ldc, accumulate);
}
void leaky_relu_f32(const float* x, float* y, std::size_t n, float slope) {
  leaky_relu_impl(x, y, n, slope);
}
void leaky_relu_grad_f32(const float* y, const float* dy, float* dx, std::size_t n, float slope) {
  leaky_relu_grad_impl(y, dy, dx, n, slope);
}
void tanh_grad_f32(const float* y, const float* dy, float* dx, std::size_t n) {
  tanh_grad_impl(y, dy, dx, n);
}
void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}
void add_f32(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}
void scale_f32(float* x, float a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}
void adam_step_f32(float* w, const float* g, float* m, float* v, std::size_t n,
                   float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2) {
  adam_step_impl(w, g, m, v, n, lr, b1, b2, eps, inv_bc1, inv_bc2);
}

}  // namespace scalar

// float64 has no SIMD variant; these are the dispatch targets directly.
void gemm(int M, int N, int K, const double* A, int lda, const double* B, int ldb,
          double* C, int ldc, bool accumulate) {
  gemm_impl(M, N, K, A, lda, B, ldb, C, ldc, accumulate);
}
void leaky_relu(const double* x, double* y, std::size_t n, double slope) {
  leaky_relu_impl(x, y, n, slope);
}
void leaky_relu_grad(const double* y, const double* dy, double* dx, std::size_t n, double slope) {
  leaky_relu_grad_impl(y, dy, dx, n, slope);
}
void tanh_forward(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}
void tanh_forward(const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}
void tanh_grad(const double* y, const double* dy, double* dx, std::size_t n) {
  tanh_grad_impl(y, dy, dx, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}
void add(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}
void scale(double* x, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}
void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
               double lr, double b1, double b2, double eps, double inv_bc1, double inv_bc2) {
  adam_step_impl(w, g, m, v, n, lr, b1, b2, eps, inv_bc1, inv_bc2);
}

}  // namespace crossview::kernels
