// AVX2+FMA variants of the float32 kernels. Compiled with -mavx2 -mfma in
// this TU only; callers go through the dispatch layer which checks CPUID.
//
// Bit-equality with the scalar reference is a hard contract here, not an
// optimization nicety. It holds because every output element sees the exact
// operation sequence the reference performs: GEMM accumulates lane-wise in
// ascending k with vfmadd (reference uses std::fma), and the elementwise
// kernels mirror the reference's operation order using only correctly
// rounded IEEE instructions (mul/add/sub/div/sqrt/blend).

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "crossview/kernels.hpp"

namespace crossview::kernels::avx2 {

namespace {

// Mask with the first `n` (0..8) lanes active.
inline __m256i tail_mask(int n) {
  alignas(32) static const int table[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                            0,  0,  0,  0,  0,  0,  0,  0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 8 - n));
}

// R-row by 16-column register tile, k innermost.
template <int R>
void gemm_tile16(int n0, int K, const float* A, int lda, const float* B, int ldb,
                 float* C, int ldc, bool accumulate) {
  __m256 acc[R][2];
  for (int r = 0; r < R; ++r) {
    float* c = C + static_cast<std::size_t>(r) * ldc + n0;
    acc[r][0] = accumulate ? _mm256_loadu_ps(c) : _mm256_setzero_ps();
    acc[r][1] = accumulate ? _mm256_loadu_ps(c + 8) : _mm256_setzero_ps();
  }
  for (int k = 0; k < K; ++k) {
    const float* b = B + static_cast<std::size_t>(k) * ldb + n0;
    const __m256 b0 = _mm256_loadu_ps(b);
    const __m256 b1 = _mm256_loadu_ps(b + 8);
    for (int r = 0; r < R; ++r) {
      const __m256 a = _mm256_broadcast_ss(A + static_cast<std::size_t>(r) * lda + k);
      acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* c = C + static_cast<std::size_t>(r) * ldc + n0;
    _mm256_storeu_ps(c, acc[r][0]);
    _mm256_storeu_ps(c + 8, acc[r][1]);
  }
}

// Masked remainder tile: up to 16 columns, lanes beyond `cols` untouched.
template <int R>
void gemm_tile_tail(int n0, int cols, int K, const float* A, int lda, const float* B,
                    int ldb, float* C, int ldc, bool accumulate) {
  const int c0 = cols < 8 ? cols : 8;
  const int c1 = cols - c0;
  const __m256i m0 = tail_mask(c0);
  const __m256i m1 = tail_mask(c1);
  __m256 acc[R][2];
  for (int r = 0; r < R; ++r) {
    float* c = C + static_cast<std::size_t>(r) * ldc + n0;
    acc[r][0] = accumulate ? _mm256_maskload_ps(c, m0) : _mm256_setzero_ps();
    acc[r][1] = (accumulate && c1 > 0) ? _mm256_maskload_ps(c + 8, m1) : _mm256_setzero_ps();
  }
  for (int k = 0; k < K; ++k) {
    const float* b = B + static_cast<std::size_t>(k) * ldb + n0;
    const __m256 b0 = _mm256_maskload_ps(b, m0);
    const __m256 b1 = c1 > 0 ? _mm256_maskload_ps(b + 8, m1) : _mm256_setzero_ps();
    for (int r = 0; r < R; ++r) {
      const __m256 a = _mm256_broadcast_ss(A + static_cast<std::size_t>(r) * lda + k);
      acc[r][0] = _mm256_fmadd_ps(a, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_ps(a, b1, acc[r][1]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* c = C + static_cast<std::size_t>(r) * ldc + n0;
    _mm256_maskstore_ps(c, m0, acc[r][0]);
    if (c1 > 0) _mm256_maskstore_ps(c + 8, m1, acc[r][1]);
  }
}

template <int R>
void gemm_rows(int N, int K, const float* A, int lda, const float* B, int ldb,
               float* C, int ldc, bool accumulate) {
  int n0 = 0;
  for (; n0 + 16 <= N; n0 += 16) {
    gemm_tile16<R>(n0, K, A, lda, B, ldb, C, ldc, accumulate);
  }
  if (n0 < N) {
    gemm_tile_tail<R>(n0, N - n0, K, A, lda, B, ldb, C, ldc, accumulate);
  }
}

}  // namespace

void gemm_f32(int M, int N, int K, const float* A, int lda, const float* B, int ldb,
              float* C, int ldc, bool accumulate) {
  int m = 0;
  for (; m + 4 <= M; m += 4) {
    gemm_rows<4>(N, K, A + static_cast<std::size_t>(m) * lda, lda, B, ldb,
                 C + static_cast<std::size_t>(m) * ldc, ldc, accumulate);
  }
  const int rem = M - m;
  const float* a = A + static_cast<std::size_t>(m) * lda;
  float* c = C + static_cast<std::size_t>(m) * ldc;
  switch (rem) {
    case 3: gemm_rows<3>(N, K, a, lda, B, ldb, c, ldc, accumulate); break;
    case 2: gemm_rows<2>(N, K, a, lda, B, ldb, c, ldc, accumulate); break;
    case 1: gemm_rows<1>(N, K, a, lda, B, ldb, c, ldc, accumulate); break;
    default: break;
  }
}

void leaky_relu_f32(const float* x, float* y, std::size_t n, float slope) {
  const __m256 s = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_mul_ps(s, v);
    const __m256 gt = _mm256_cmp_ps(v, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, v, gt));
  }
  for (; i < n; ++i) {
    const float v = x[i];
    y[i] = v > 0.0f ? v : slope * v;
  }
}

void leaky_relu_grad_f32(const float* y, const float* dy, float* dx, std::size_t n,
                         float slope) {
  const __m256 s = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256 g = _mm256_loadu_ps(dy + i);
    const __m256 neg = _mm256_mul_ps(s, g);
    const __m256 gt = _mm256_cmp_ps(yv, zero, _CMP_GT_OQ);
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(neg, g, gt));
  }
  for (; i < n; ++i) {
    dx[i] = y[i] > 0.0f ? dy[i] : slope * dy[i];
  }
}

void tanh_grad_f32(const float* y, const float* dy, float* dx, std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256 t = _mm256_mul_ps(yv, yv);
    const __m256 u = _mm256_sub_ps(one, t);
    _mm256_storeu_ps(dx + i, _mm256_mul_ps(_mm256_loadu_ps(dy + i), u));
  }
  for (; i < n; ++i) {
    dx[i] = dy[i] * (1.0f - y[i] * y[i]);
  }
}

void axpy_f32(float a, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 r = _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i));
    _mm256_storeu_ps(y + i, r);
  }
  for (; i < n; ++i) y[i] = __builtin_fmaf(a, x[i], y[i]);
}

void add_f32(const float* x, float* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) y[i] += x[i];
}

void scale_f32(float* x, float a, std::size_t n) {
  const __m256 av = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), av));
  }
  for (; i < n; ++i) x[i] *= a;
}

void adam_step_f32(float* w, const float* g, float* m, float* v, std::size_t n,
                   float lr, float b1, float b2, float eps, float inv_bc1, float inv_bc2) {
  const __m256 b1v = _mm256_set1_ps(b1);
  const __m256 b2v = _mm256_set1_ps(b2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - b1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - b2);
  const __m256 lrv = _mm256_set1_ps(lr);
  const __m256 epsv = _mm256_set1_ps(eps);
  const __m256 bc1 = _mm256_set1_ps(inv_bc1);
  const __m256 bc2 = _mm256_set1_ps(inv_bc2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 gi = _mm256_loadu_ps(g + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1v, _mm256_loadu_ps(m + i)),
                                    _mm256_mul_ps(omb1, gi));
    const __m256 gg = _mm256_mul_ps(gi, gi);
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2v, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, gg));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 num = _mm256_mul_ps(lrv, _mm256_mul_ps(mi, bc1));
    const __m256 den = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, bc2)), epsv);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), _mm256_div_ps(num, den)));
  }
  const float one_minus_b1 = 1.0f - b1;
  const float one_minus_b2 = 1.0f - b2;
  for (; i < n; ++i) {
    const float gi = g[i];
    const float mi = b1 * m[i] + one_minus_b1 * gi;
    const float vi = b2 * v[i] + one_minus_b2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const float num = lr * (mi * inv_bc1);
    const float den = std::sqrt(vi * inv_bc2) + eps;
    w[i] = w[i] - num / den;
  }
}

}  // namespace crossview::kernels::avx2

#endif  // x86_64
