#include "cransim/kern.hpp"

// Compiled with -mavx2 -mfma on x86-64 (see src/CMakeLists.txt); callers must
// only reach these through the dispatcher after the cpuid check.

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace cransim::kern::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// sum of even lanes minus sum of odd lanes
inline double hsum_evenminusodd(__m256d v) {
  const __m256d sign = _mm256_set_pd(-0.0, 0.0, -0.0, 0.0);
  return hsum(_mm256_xor_pd(v, sign));
}

cd cdotc_avx2(std::size_t n, const cd* x, const cd* y) {
  const double* xp = reinterpret_cast<const double*>(x);
  const double* yp = reinterpret_cast<const double*>(y);
  __m256d p = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    __m256d yv = _mm256_loadu_pd(yp + 2 * i);
    __m256d ys = _mm256_permute_pd(yv, 0x5);
    p = _mm256_fmadd_pd(xv, yv, p);
    q = _mm256_fmadd_pd(xv, ys, q);
  }
  double re = hsum(p);
  double im = hsum_evenminusodd(q);
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    re += xr * yr + xi * yi;
    im += xr * yi - xi * yr;
  }
  return {re, im};
}

cd cdotu_avx2(std::size_t n, const cd* x, const cd* y) {
  const double* xp = reinterpret_cast<const double*>(x);
  const double* yp = reinterpret_cast<const double*>(y);
  __m256d p = _mm256_setzero_pd();
  __m256d q = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    __m256d yv = _mm256_loadu_pd(yp + 2 * i);
    __m256d ys = _mm256_permute_pd(yv, 0x5);
    p = _mm256_fmadd_pd(xv, yv, p);
    q = _mm256_fmadd_pd(xv, ys, q);
  }
  double re = hsum_evenminusodd(p);
  double im = hsum(q);
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    const double yr = y[i].real(), yi = y[i].imag();
    re += xr * yr - xi * yi;
    im += xr * yi + xi * yr;
  }
  return {re, im};
}

double sqnorm_avx2(std::size_t n, const cd* x) {
  const double* xp = reinterpret_cast<const double*>(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    acc = _mm256_fmadd_pd(xv, xv, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    s += x[i].real() * x[i].real() + x[i].imag() * x[i].imag();
  }
  return s;
}

void axpy_avx2(std::size_t n, cd a, const cd* x, cd* y) {
  const double* xp = reinterpret_cast<const double*>(x);
  double* yp = reinterpret_cast<double*>(y);
  const __m256d ar = _mm256_set1_pd(a.real());
  const __m256d ai = _mm256_set1_pd(a.imag());
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    __m256d xs = _mm256_permute_pd(xv, 0x5);
    __m256d t = _mm256_mul_pd(xs, ai);
    __m256d r = _mm256_fmaddsub_pd(xv, ar, t);
    _mm256_storeu_pd(yp + 2 * i, _mm256_add_pd(_mm256_loadu_pd(yp + 2 * i), r));
  }
  const double arr = a.real(), aii = a.imag();
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += cd(arr * xr - aii * xi, arr * xi + aii * xr);
  }
}

}  // namespace

const Ops avx2_ops = {cdotc_avx2, cdotu_avx2, sqnorm_avx2, axpy_avx2};

}  // namespace cransim::kern::detail

#else

namespace cransim::kern::detail {
const Ops avx2_ops = {nullptr, nullptr, nullptr, nullptr};
}

#endif
