// AVX2 variants. This translation unit is the only one compiled with
// -mavx2/-mfma; callers reach it through the dispatch table after the
// runtime CPU check.

#include "gridcast/kernels.hpp"

#if defined(GRIDCAST_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace gridcast::kern::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline __m256d abs_pd(__m256d v) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(v, mask);
}

}  // namespace

double sum_avx2(std::span<const double> x) {
  const std::size_t n = x.size();
  const double* p = x.data();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(p + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += p[i];
  return s;
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += pa[i] * pb[i];
  return s;
}

double sse_about_avx2(std::span<const double> x, double center) {
  const std::size_t n = x.size();
  const double* p = x.data();
  const __m256d c = _mm256_set1_pd(center);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = p[i] - center;
    s += d * d;
  }
  return s;
}

double abs_diff_sum_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i));
    acc = _mm256_add_pd(acc, abs_pd(d));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(pa[i] - pb[i]);
  return s;
}

double weighted_l1_avx2(std::span<const double> a, std::span<const double> b,
                        std::span<const double> inv_scale) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  const double* pw = inv_scale.data();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(pw + i), abs_pd(d), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += pw[i] * std::fabs(pa[i] - pb[i]);
  return s;
}

void axpy_avx2(double a, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(py + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), vy);
    _mm256_storeu_pd(py + i, vy);
  }
  for (; i < n; ++i) py[i] += a * px[i];
}

std::size_t count_greater_avx2(std::span<const double> x, double threshold) {
  const std::size_t n = x.size();
  const double* p = x.data();
  const __m256d t = _mm256_set1_pd(threshold);
  std::size_t c = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d cmp = _mm256_cmp_pd(_mm256_loadu_pd(p + i), t, _CMP_GT_OQ);
    c += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(cmp)));
  }
  for (; i < n; ++i) c += (p[i] > threshold) ? 1 : 0;
  return c;
}

void nearest_centroid_avx2(std::span<const double> px, std::span<const double> py,
                           std::span<const double> cx, std::span<const double> cy,
                           std::span<int> out_index, std::span<double> out_dist2) {
  const std::size_t n = px.size();
  const std::size_t k = cx.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vx = _mm256_loadu_pd(px.data() + i);
    __m256d vy = _mm256_loadu_pd(py.data() + i);
    __m256d best_d2 = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    __m256d best_ix = _mm256_setzero_pd();
    for (std::size_t j = 0; j < k; ++j) {
      __m256d dx = _mm256_sub_pd(vx, _mm256_set1_pd(cx[j]));
      __m256d dy = _mm256_sub_pd(vy, _mm256_set1_pd(cy[j]));
      __m256d d2 = _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dx, dx));
      __m256d lt = _mm256_cmp_pd(d2, best_d2, _CMP_LT_OQ);
      best_d2 = _mm256_blendv_pd(best_d2, d2, lt);
      best_ix = _mm256_blendv_pd(best_ix, _mm256_set1_pd(static_cast<double>(j)), lt);
    }
    alignas(32) double d2s[4];
    alignas(32) double ixs[4];
    _mm256_store_pd(d2s, best_d2);
    _mm256_store_pd(ixs, best_ix);
    for (int lane = 0; lane < 4; ++lane) {
      out_index[i + lane] = static_cast<int>(ixs[lane]);
      out_dist2[i + lane] = d2s[lane];
    }
  }
  if (i < n) {
    nearest_centroid_scalar(px.subspan(i), py.subspan(i), cx, cy,
                            out_index.subspan(i), out_dist2.subspan(i));
  }
}

}  // namespace gridcast::kern::detail

#endif  // GRIDCAST_HAVE_AVX2
