#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "codiff/autodiff.hpp"
#include "codiff/rng.hpp"

using namespace codiff;

namespace {

// Finite-difference check of d(scalar root)/d(leaf) for an arbitrary graph
// builder. The builder gets the leaf data and returns the root id.
void fd_check(std::function<int(ad::Tape&, const std::vector<double>&)> build,
              std::vector<double> leaf_data, double h = 1e-6, double tol = 1e-5) {
  ad::Tape tape;
  const int root = build(tape, leaf_data);
  tape.backward(root);
  // Leaf is always node 0 by convention in these tests.
  std::vector<double> analytic(tape.adjoint(0).begin(), tape.adjoint(0).end());
  for (std::size_t i = 0; i < leaf_data.size(); ++i) {
    auto eval = [&](double v) {
      std::vector<double> d = leaf_data;
      d[i] = v;
      ad::Tape t2;
      return t2.scalar(build(t2, d));
    };
    const double fd = (eval(leaf_data[i] + h) - eval(leaf_data[i] - h)) / (2.0 * h);
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
    CHECK(std::abs(fd - analytic[i]) <= tol * scale);
  }
}

std::vector<double> randv(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

}  // namespace

TEST_CASE("linear layer value and gradients") {
  Rng rng(1);
  const auto x = randv(rng, 2 * 3);
  const auto w = randv(rng, 4 * 3);
  const auto b = randv(rng, 4);

  // Value: y = x * w^T + b row-wise.
  ad::Tape tape;
  const int xi = tape.leaf(x.data(), 2, 3);
  const int wi = tape.constant(w.data(), 4, 3);
  const int bi = tape.constant(b.data(), 1, 4);
  const int y = tape.linear(xi, wi, bi);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) {
      double expect = b[c];
      for (int k = 0; k < 3; ++k) expect += x[r * 3 + k] * w[c * 3 + k];
      CHECK(tape.value(y)[r * 4 + c] == doctest::Approx(expect).epsilon(1e-12));
    }

  // Gradient w.r.t. x.
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int xi2 = t.leaf(d.data(), 2, 3);
        const int wi2 = t.constant(w.data(), 4, 3);
        const int bi2 = t.constant(b.data(), 1, 4);
        return t.sum_all(t.relu(t.linear(xi2, wi2, bi2)));
      },
      x);
  // Gradient w.r.t. w.
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int wi2 = t.leaf(d.data(), 4, 3);
        const int xi2 = t.constant(x.data(), 2, 3);
        const int bi2 = t.constant(b.data(), 1, 4);
        return t.sum_all(t.relu(t.linear(xi2, wi2, bi2)));
      },
      w);
  // Gradient w.r.t. b.
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int bi2 = t.leaf(d.data(), 1, 4);
        const int xi2 = t.constant(x.data(), 2, 3);
        const int wi2 = t.constant(w.data(), 4, 3);
        return t.sum_all(t.relu(t.linear(xi2, wi2, bi2)));
      },
      b);
}

TEST_CASE("neighbor sum respects the adjacency and its transpose") {
  Graph g;
  g.num_nodes = 4;
  g.edges = {{0, 1}, {1, 2}, {0, 3}};
  Adjacency adj(g);
  Rng rng(2);
  const auto x = randv(rng, 4 * 2);
  ad::Tape tape;
  const int xi = tape.leaf(x.data(), 4, 2);
  const int y = tape.neighbor_sum(xi, &adj);
  // Node 0 sums nodes 1 and 3.
  CHECK(tape.value(y)[0] == doctest::Approx(x[1 * 2] + x[3 * 2]).epsilon(1e-14));
  const auto w = randv(rng, 4 * 2);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int a = t.leaf(d.data(), 4, 2);
        const int wi = t.constant(w.data(), 4, 2);
        return t.dot(t.neighbor_sum(a, &adj), wi);
      },
      x);
}

TEST_CASE("layer norm gradients for input, gain and offset") {
  Rng rng(3);
  const auto x = randv(rng, 3 * 5);
  const auto g = randv(rng, 5, 0.5, 1.5);
  const auto b = randv(rng, 5);
  const auto seedvec = randv(rng, 3 * 5);
  auto weighted = [&](ad::Tape& t, int ln) {
    const int s = t.constant(seedvec.data(), 3, 5);
    return t.dot(ln, s);
  };
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int xi = t.leaf(d.data(), 3, 5);
        const int gi = t.constant(g.data(), 1, 5);
        const int bi = t.constant(b.data(), 1, 5);
        return weighted(t, t.layer_norm(xi, gi, bi));
      },
      x, 1e-6, 1e-4);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int gi = t.leaf(d.data(), 1, 5);
        const int xi = t.constant(x.data(), 3, 5);
        const int bi = t.constant(b.data(), 1, 5);
        return weighted(t, t.layer_norm(xi, gi, bi));
      },
      g);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int bi = t.leaf(d.data(), 1, 5);
        const int xi = t.constant(x.data(), 3, 5);
        const int gi = t.constant(g.data(), 1, 5);
        return weighted(t, t.layer_norm(xi, gi, bi));
      },
      b);
}

TEST_CASE("sigmoid with clamping") {
  ad::Tape tape;
  const double z[] = {-40.0, -0.3, 0.0, 2.0, 40.0};
  const int zi = tape.leaf(z, 5, 1);
  const int q = tape.sigmoid_clamp(zi);
  CHECK(tape.value(q)[0] == kProbEps);
  CHECK(tape.value(q)[4] == 1.0 - kProbEps);
  CHECK(tape.value(q)[2] == 0.5);
  tape.backward(tape.sum_all(q));
  CHECK(tape.adjoint(zi)[0] == 0.0);  // clamped: no gradient
  CHECK(tape.adjoint(zi)[4] == 0.0);
  CHECK(tape.adjoint(zi)[2] == doctest::Approx(0.25).epsilon(1e-12));

  Rng rng(4);
  const auto zz = randv(rng, 6, -3.0, 3.0);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int a = t.leaf(d.data(), 6, 1);
        return t.entropy_term(t.sigmoid_clamp(a));
      },
      zz);
}

TEST_CASE("loss term ops against finite differences") {
  Rng rng(5);
  Graph g;
  g.num_nodes = 5;
  g.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
  const EnergyPoly e = build_energy(ProblemKind::MIS, g);
  const auto probs = randv(rng, 5, 0.1, 0.9);
  const Assignment xt{1, 0, 1, 1, 0};

  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        return t.expected_energy_term(t.leaf(d.data(), 5, 1), &e);
      },
      probs);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        return t.cnd_noise_term(t.leaf(d.data(), 5, 1), &xt, 0.3);
      },
      probs);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        return t.mf_log_prob_term(t.leaf(d.data(), 5, 1), &xt);
      },
      probs);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        return t.entropy_term(t.leaf(d.data(), 5, 1));
      },
      probs);
}

TEST_CASE("shared subexpressions accumulate adjoints") {
  // f(x) = dot(x, x) + sum(x): df/dx = 2x + 1.
  Rng rng(6);
  const auto x = randv(rng, 7);
  ad::Tape tape;
  const int xi = tape.leaf(x.data(), 7, 1);
  const int parts[] = {tape.dot(xi, xi), tape.sum_all(xi)};
  const double coeffs[] = {1.0, 1.0};
  tape.backward(tape.combine(parts, coeffs));
  for (int i = 0; i < 7; ++i)
    CHECK(tape.adjoint(xi)[i] == doctest::Approx(2.0 * x[i] + 1.0).epsilon(1e-12));
}

TEST_CASE("mul, exp and combine chain") {
  Rng rng(7);
  const auto x = randv(rng, 3, 0.1, 0.9);
  fd_check(
      [&](ad::Tape& t, const std::vector<double>& d) {
        const int a = t.leaf(d.data(), 3, 1);
        const int prod = t.mul(a, a);                // x^2 elementwise
        const int s = t.sum_all(prod);               // sum x^2
        const int ex = t.exp_scalar(s);              // exp(sum x^2)
        const int parts[] = {ex, t.sum_all(a)};
        const double coeffs[] = {0.5, -2.0};
        return t.combine(parts, coeffs, 3.0);
      },
      x);
}

TEST_CASE("constants carry no gradient and scale works") {
  ad::Tape tape;
  const double c[] = {1.0, 2.0};
  const double l[] = {3.0, 4.0};
  const int ci = tape.constant(c, 2, 1);
  const int li = tape.leaf(l, 2, 1);
  const int root = tape.sum_all(tape.scale(tape.add(ci, li), 2.0));
  CHECK(tape.scalar(root) == 20.0);
  tape.backward(root);
  CHECK(tape.adjoint(li)[0] == 2.0);
  CHECK(tape.adjoint(li)[1] == 2.0);
}

TEST_CASE("tape reset is reusable") {
  ad::Tape tape;
  for (int rep = 0; rep < 3; ++rep) {
    tape.reset();
    const double v[] = {1.0, 2.0, 3.0};
    const int x = tape.leaf(v, 3, 1);
    const int root = tape.dot(x, x);
    CHECK(tape.scalar(root) == 14.0);
    tape.backward(root);
    CHECK(tape.adjoint(x)[2] == 6.0);
  }
}
