#include "codiff/kernels.hpp"

// AVX2/FMA variants of the reference kernels. This translation unit is built
// with -mavx2 -mfma on x86-64 and only reached after a runtime CPU check.

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>

namespace codiff::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline double dot_avx2_n(const double* x, const double* y, int n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  int i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void matmul_nt_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<long>(i) * k;
    double* ci = c + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double s = dot_avx2_n(ai, b + static_cast<long>(j) * k, k);
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

// ci[0..n) += av * bt[0..n)
inline void row_fma(double* ci, const double* bt, double av, int n) {
  const __m256d va = _mm256_set1_pd(av);
  int j = 0;
  for (; j + 4 <= n; j += 4) {
    __m256d cj = _mm256_loadu_pd(ci + j);
    cj = _mm256_fmadd_pd(va, _mm256_loadu_pd(bt + j), cj);
    _mm256_storeu_pd(ci + j, cj);
  }
  for (; j < n; ++j) ci[j] += av * bt[j];
}

void matmul_nn_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<long>(i) * k;
    for (int t = 0; t < k; ++t) row_fma(ci, b + static_cast<long>(t) * n, ai[t], n);
  }
}

void matmul_tn_avx2(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc)
    for (long i = 0; i < static_cast<long>(m) * n; ++i) c[i] = 0.0;
  for (int r = 0; r < k; ++r) {
    const double* ar = a + static_cast<long>(r) * m;
    const double* br = b + static_cast<long>(r) * n;
    for (int i = 0; i < m; ++i) row_fma(c + static_cast<long>(i) * n, br, ar[i], n);
  }
}

void axpy_avx2(double* y, const double* x, double a, int n) { row_fma(y, x, a, n); }

double dot_avx2(const double* x, const double* y, int n) { return dot_avx2_n(x, y, n); }

double sum_avx2(const double* x, int n) {
  __m256d acc = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double sumsq_avx2(const double* x, int n) { return dot_avx2_n(x, x, n); }

void relu_fwd_avx2(double* y, const double* x, int n) {
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_avx2(double* dx, const double* x, const double* dy, int n) {
  const __m256d zero = _mm256_setzero_pd();
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    const __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
    _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void add_avx2(double* z, const double* x, const double* y, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(z + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) z[i] = x[i] + y[i];
}

}  // namespace

extern const Ops kAvx2Ops;
const Ops kAvx2Ops = {
    "avx2",        matmul_nt_avx2, matmul_nn_avx2, matmul_tn_avx2,
    axpy_avx2,     dot_avx2,       sum_avx2,       sumsq_avx2,
    relu_fwd_avx2, relu_bwd_avx2,  add_avx2,
};

}  // namespace codiff::kern

#endif  // x86-64
