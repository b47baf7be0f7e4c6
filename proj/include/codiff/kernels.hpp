#pragma once

namespace codiff::kern {

/// Dense inner-loop kernels. Scalar versions are the reference; the AVX2
/// variants are selected at runtime when the CPU supports them and must agree
/// with the reference up to summation-order rounding (see tests).
struct Ops {
  const char* name;
  // C (m x n) = A (m x k) * B^T with B stored (n x k); acc adds into C.
  void (*matmul_nt)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);
  // C (m x n) = A (m x k) * B (k x n)
  void (*matmul_nn)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);
  // C (m x n) = A^T * B with A stored (k x m), B (k x n)
  void (*matmul_tn)(const double* a, const double* b, double* c, int m, int n, int k, bool acc);
  void (*axpy)(double* y, const double* x, double a, int n);  // y += a*x
  double (*dot)(const double* x, const double* y, int n);
  double (*sum)(const double* x, int n);
  double (*sumsq)(const double* x, int n);
  void (*relu_fwd)(double* y, const double* x, int n);
  void (*relu_bwd)(double* dx, const double* x, const double* dy, int n);  // dx += dy*(x>0)
  void (*add)(double* z, const double* x, const double* y, int n);
};

enum class Backend { Scalar, Avx2 };

bool avx2_available();
const Ops& ops_for(Backend b);

/// Active kernel set. Chosen once: AVX2 if available, overridable with the
/// CODIFF_KERNELS env var ("scalar" or "avx2") or set_backend().
const Ops& ops();
Backend active_backend();
void set_backend(Backend b);

}  // namespace codiff::kern
