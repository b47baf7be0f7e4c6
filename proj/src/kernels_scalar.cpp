#include "codiff/kernels.hpp"

// Reference kernels. Plain loops, no intrinsics; correctness baseline for the
// SIMD variants.

namespace codiff::kern {
namespace {

void matmul_nt_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<long>(i) * k;
    double* ci = c + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<long>(j) * k;
      double s = 0.0;
      for (int t = 0; t < k; ++t) s += ai[t] * bj[t];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_nn_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<long>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + static_cast<long>(i) * k;
    for (int t = 0; t < k; ++t) {
      const double av = ai[t];
      const double* bt = b + static_cast<long>(t) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bt[j];
    }
  }
}

void matmul_tn_scalar(const double* a, const double* b, double* c, int m, int n, int k, bool acc) {
  if (!acc)
    for (long i = 0; i < static_cast<long>(m) * n; ++i) c[i] = 0.0;
  for (int r = 0; r < k; ++r) {
    const double* ar = a + static_cast<long>(r) * m;
    const double* br = b + static_cast<long>(r) * n;
    for (int i = 0; i < m; ++i) {
      const double av = ar[i];
      double* ci = c + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * br[j];
    }
  }
}

void axpy_scalar(double* y, const double* x, double a, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* x, const double* y, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum_scalar(const double* x, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i];
  return s;
}

double sumsq_scalar(const double* x, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void relu_fwd_scalar(double* y, const double* x, int n) {
  for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd_scalar(double* dx, const double* x, const double* dy, int n) {
  for (int i = 0; i < n; ++i)
    if (x[i] > 0.0) dx[i] += dy[i];
}

void add_scalar(double* z, const double* x, const double* y, int n) {
  for (int i = 0; i < n; ++i) z[i] = x[i] + y[i];
}

}  // namespace

extern const Ops kScalarOps;
const Ops kScalarOps = {
    "scalar",        matmul_nt_scalar, matmul_nn_scalar, matmul_tn_scalar,
    axpy_scalar,     dot_scalar,       sum_scalar,       sumsq_scalar,
    relu_fwd_scalar, relu_bwd_scalar,  add_scalar,
};

}  // namespace codiff::kern
