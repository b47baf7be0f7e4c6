#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "codiff/kernels.hpp"
#include "codiff/rng.hpp"

using namespace codiff;

namespace {

std::vector<double> random_vec(Rng& rng, int n) {
  std::vector<double> v(n);
  for (double& x : v) x = 2.0 * rng.uniform() - 1.0;
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    CHECK(std::abs(a[i] - b[i]) <= tol * scale);
  }
}

}  // namespace

TEST_CASE("simd kernels agree with scalar reference") {
  if (!kern::avx2_available()) {
    MESSAGE("avx2 not available, skipping equivalence");
    return;
  }
  const auto& S = kern::ops_for(kern::Backend::Scalar);
  const auto& V = kern::ops_for(kern::Backend::Avx2);
  Rng rng(42);
  // Shapes straddle the vector width, including remainders and length 1.
  const int dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 33, 64};
  for (int m : {1, 3, 8}) {
    for (int n : dims) {
      for (int k : dims) {
        const auto a = random_vec(rng, m * k);
        const auto b = random_vec(rng, n * k);
        std::vector<double> c0(m * n), c1(m * n);
        S.matmul_nt(a.data(), b.data(), c0.data(), m, n, k, false);
        V.matmul_nt(a.data(), b.data(), c1.data(), m, n, k, false);
        check_close(c0, c1, 1e-13);

        const auto b2 = random_vec(rng, k * n);
        std::vector<double> d0 = random_vec(rng, m * n), d1 = d0;
        S.matmul_nn(a.data(), b2.data(), d0.data(), m, n, k, true);
        V.matmul_nn(a.data(), b2.data(), d1.data(), m, n, k, true);
        check_close(d0, d1, 1e-13);

        const auto at = random_vec(rng, k * m);
        std::vector<double> e0(m * n), e1(m * n);
        S.matmul_tn(at.data(), b2.data(), e0.data(), m, n, k, false);
        V.matmul_tn(at.data(), b2.data(), e1.data(), m, n, k, false);
        check_close(e0, e1, 1e-13);
      }
    }
  }
  for (int n : dims) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);
    CHECK(std::abs(S.dot(x.data(), y.data(), n) - V.dot(x.data(), y.data(), n)) <= 1e-13 * n);
    CHECK(std::abs(S.sum(x.data(), n) - V.sum(x.data(), n)) <= 1e-13 * n);
    CHECK(std::abs(S.sumsq(x.data(), n) - V.sumsq(x.data(), n)) <= 1e-13 * n);

    // FMA contraction gives the vector axpy one fewer rounding than the
    // scalar reference, so allow a last-ulp difference.
    std::vector<double> y0 = y, y1 = y;
    S.axpy(y0.data(), x.data(), 0.7, n);
    V.axpy(y1.data(), x.data(), 0.7, n);
    check_close(y0, y1, 1e-15);

    std::vector<double> r0(n), r1(n);
    S.relu_fwd(r0.data(), x.data(), n);
    V.relu_fwd(r1.data(), x.data(), n);
    check_close(r0, r1, 0.0);

    std::vector<double> g0 = y, g1 = y;
    S.relu_bwd(g0.data(), x.data(), r0.data(), n);
    V.relu_bwd(g1.data(), x.data(), r0.data(), n);
    check_close(g0, g1, 0.0);

    std::vector<double> z0(n), z1(n);
    S.add(z0.data(), x.data(), y.data(), n);
    V.add(z1.data(), x.data(), y.data(), n);
    check_close(z0, z1, 0.0);
  }
}

TEST_CASE("matmul_nt against hand-computed product") {
  // [1 2; 3 4] * [5 6; 7 8]^T = [17 23; 39 53]
  const double a[] = {1, 2, 3, 4};
  const double b[] = {5, 6, 7, 8};
  double c[4];
  kern::ops_for(kern::Backend::Scalar).matmul_nt(a, b, c, 2, 2, 2, false);
  CHECK(c[0] == 17.0);
  CHECK(c[1] == 23.0);
  CHECK(c[2] == 39.0);
  CHECK(c[3] == 53.0);
}

TEST_CASE("backend selection is sticky and reversible") {
  const auto saved = kern::active_backend();
  kern::set_backend(kern::Backend::Scalar);
  CHECK(kern::active_backend() == kern::Backend::Scalar);
  CHECK(std::string(kern::ops().name) == "scalar");
  kern::set_backend(saved);
}
