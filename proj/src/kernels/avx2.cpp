// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <vector>

#include "alseg/kernels.hpp"

namespace alseg::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d low_pd(__m256 v) { return _mm256_cvtps_pd(_mm256_castps256_ps128(v)); }
inline __m256d high_pd(__m256 v) { return _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)); }

inline void store8(float* dst, __m256d lo, __m256d hi) {
  _mm256_storeu_ps(dst, _mm256_insertf128_ps(_mm256_castps128_ps256(_mm256_cvtpd_ps(lo)), _mm256_cvtpd_ps(hi), 1));
}

// Register-blocked 4 x 8 micro-kernel; per output element the summation order
// matches the scalar reference (bias first, then p = 0 .. k-1).
void gemm_avx2(const float* a, const float* b, const float* bias, float* out, std::size_t m, std::size_t k,
               std::size_t n) {
  std::vector<double> ad(a, a + m * k);
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* w0 = ad.data() + i * k;
    const double* w1 = w0 + k;
    const double* w2 = w1 + k;
    const double* w3 = w2 + k;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c00, c01, c10, c11, c20, c21, c30, c31;
      c00 = c01 = _mm256_set1_pd(bias != nullptr ? bias[i] : 0.0);
      c10 = c11 = _mm256_set1_pd(bias != nullptr ? bias[i + 1] : 0.0);
      c20 = c21 = _mm256_set1_pd(bias != nullptr ? bias[i + 2] : 0.0);
      c30 = c31 = _mm256_set1_pd(bias != nullptr ? bias[i + 3] : 0.0);
      const float* bp = b + j;
      for (std::size_t p = 0; p < k; ++p, bp += n) {
        const __m256 bv = _mm256_loadu_ps(bp);
        const __m256d b0 = low_pd(bv);
        const __m256d b1 = high_pd(bv);
        __m256d w = _mm256_broadcast_sd(w0 + p);
        c00 = _mm256_fmadd_pd(w, b0, c00);
        c01 = _mm256_fmadd_pd(w, b1, c01);
        w = _mm256_broadcast_sd(w1 + p);
        c10 = _mm256_fmadd_pd(w, b0, c10);
        c11 = _mm256_fmadd_pd(w, b1, c11);
        w = _mm256_broadcast_sd(w2 + p);
        c20 = _mm256_fmadd_pd(w, b0, c20);
        c21 = _mm256_fmadd_pd(w, b1, c21);
        w = _mm256_broadcast_sd(w3 + p);
        c30 = _mm256_fmadd_pd(w, b0, c30);
        c31 = _mm256_fmadd_pd(w, b1, c31);
      }
      store8(out + i * n + j, c00, c01);
      store8(out + (i + 1) * n + j, c10, c11);
      store8(out + (i + 2) * n + j, c20, c21);
      store8(out + (i + 3) * n + j, c30, c31);
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        double acc = bias != nullptr ? bias[i + r] : 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += ad[(i + r) * k + p] * static_cast<double>(b[p * n + j]);
        out[(i + r) * n + j] = static_cast<float>(acc);
      }
    }
  }
  for (; i < m; ++i) {
    const double* w0 = ad.data() + i * k;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c0 = _mm256_set1_pd(bias != nullptr ? bias[i] : 0.0);
      __m256d c1 = c0;
      const float* bp = b + j;
      for (std::size_t p = 0; p < k; ++p, bp += n) {
        const __m256 bv = _mm256_loadu_ps(bp);
        const __m256d w = _mm256_broadcast_sd(w0 + p);
        c0 = _mm256_fmadd_pd(w, low_pd(bv), c0);
        c1 = _mm256_fmadd_pd(w, high_pd(bv), c1);
      }
      store8(out + i * n + j, c0, c1);
    }
    for (; j < n; ++j) {
      double acc = bias != nullptr ? bias[i] : 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += w0[p] * static_cast<double>(b[p * n + j]);
      out[i * n + j] = static_cast<float>(acc);
    }
  }
}

double dot_avx2(const float* x, const float* y, std::size_t n);

// 4 x 2 blocks of row-pair dot products.
void gemm_nt_avx2(const float* a, const float* b, float* out, std::size_t m, std::size_t n, std::size_t k) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
      __m256d acc[4][2];
      for (auto& row : acc) row[0] = row[1] = _mm256_setzero_pd();
      const float* b0 = b + j * k;
      const float* b1 = b0 + k;
      std::size_t p = 0;
      for (; p + 4 <= k; p += 4) {
        const __m256d vb0 = _mm256_cvtps_pd(_mm_loadu_ps(b0 + p));
        const __m256d vb1 = _mm256_cvtps_pd(_mm_loadu_ps(b1 + p));
        for (std::size_t r = 0; r < 4; ++r) {
          const __m256d va = _mm256_cvtps_pd(_mm_loadu_ps(a + (i + r) * k + p));
          acc[r][0] = _mm256_fmadd_pd(va, vb0, acc[r][0]);
          acc[r][1] = _mm256_fmadd_pd(va, vb1, acc[r][1]);
        }
      }
      for (std::size_t r = 0; r < 4; ++r) {
        double s0 = hsum(acc[r][0]);
        double s1 = hsum(acc[r][1]);
        for (std::size_t q = p; q < k; ++q) {
          const double av = a[(i + r) * k + q];
          s0 += av * static_cast<double>(b0[q]);
          s1 += av * static_cast<double>(b1[q]);
        }
        out[(i + r) * n + j] = static_cast<float>(s0);
        out[(i + r) * n + j + 1] = static_cast<float>(s1);
      }
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) {
        out[(i + r) * n + j] = static_cast<float>(dot_avx2(a + (i + r) * k, b + j * k, k));
      }
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = static_cast<float>(dot_avx2(a + i * k, b + j * k, k));
  }
}

double dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 yv = _mm256_loadu_ps(y + i);
    s0 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                         _mm256_cvtps_pd(_mm256_castps256_ps128(yv)), s0);
    s1 = _mm256_fmadd_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                         _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)), s1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]) * static_cast<double>(y[i]);
  return s;
}

double sum_avx2(const float* x, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    s0 = _mm256_add_pd(s0, _mm256_cvtps_pd(_mm256_castps256_ps128(xv)));
    s1 = _mm256_add_pd(s1, _mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)));
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += static_cast<double>(x[i]);
  return s;
}

double squared_distance_avx2(const float* x, const float* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    const __m256 yv = _mm256_loadu_ps(y + i);
    const __m256d d0 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_castps256_ps128(xv)),
                                     _mm256_cvtps_pd(_mm256_castps256_ps128(yv)));
    const __m256d d1 = _mm256_sub_pd(_mm256_cvtps_pd(_mm256_extractf128_ps(xv, 1)),
                                     _mm256_cvtps_pd(_mm256_extractf128_ps(yv, 1)));
    s0 = _mm256_fmadd_pd(d0, d0, s0);
    s1 = _mm256_fmadd_pd(d1, d1, s1);
  }
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    s += d * d;
  }
  return s;
}

constexpr KernelTable kAvx2{
    "avx2", &gemm_avx2, &gemm_nt_avx2, &dot_avx2, &sum_avx2, &squared_distance_avx2,
};

}  // namespace

namespace detail {
const KernelTable& avx2_table_unchecked() noexcept { return kAvx2; }
}  // namespace detail

}  // namespace alseg::kernels
