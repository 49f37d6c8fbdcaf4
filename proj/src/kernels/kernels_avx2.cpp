// AVX2+FMA variants of the array kernels. Compiled with -mavx2 -mfma in this
// translation unit only; callers reach these through the runtime dispatch in
// kernels.cpp after a cpuid check.

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace ddc::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
}

}  // namespace

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec_avx2(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = dot_avx2(m + r * cols, x, cols);
  }
}

double max_abs_diff_avx2(const double* a, const double* b, std::size_t n) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d best = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    best = _mm256_max_pd(best, _mm256_andnot_pd(sign_mask, d));
  }
  double m0 = hmax(best);
  for (; i < n; ++i) {
    double d = std::fabs(a[i] - b[i]);
    if (d > m0) m0 = d;
  }
  return m0;
}

double posterior_accumulate_avx2(const double* w, const double* l, double* acc,
                                 std::size_t n, double scale) {
  double s = dot_avx2(w, l, n);
  if (s > 0.0) {
    double inv_s = scale / s;
    const __m256d inv = _mm256_set1_pd(inv_s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      __m256d wl = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(l + i));
      __m256d upd = _mm256_fmadd_pd(wl, inv, _mm256_loadu_pd(acc + i));
      _mm256_storeu_pd(acc + i, upd);
    }
    for (; i < n; ++i) acc[i] += w[i] * l[i] * inv_s;
  }
  return s;
}

}  // namespace ddc::kernels::detail
