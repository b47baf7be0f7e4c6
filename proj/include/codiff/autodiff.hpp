#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "codiff/energy.hpp"
#include "codiff/graph.hpp"
#include "codiff/types.hpp"

namespace codiff::ad {

inline constexpr double kLayerNormEps = 1e-5;

/// Reverse-mode tape over row-major matrices (scalars are 1x1). The op set is
/// exactly what the message-passing model and the loss terms need; every
/// backward rule is hand-written and checked against finite differences.
///
/// External pointers passed to ops (adjacency, energy, assignments) must stay
/// alive until the tape is reset.
class Tape {
 public:
  int leaf(const double* data, int rows, int cols);
  int constant(const double* data, int rows, int cols);
  int scalar_constant(double v) { return constant(&v, 1, 1); }

  /// y = x * w^T + b with x (m x in), w (out x in), b (out).
  int linear(int x, int w, int b);
  /// y_i = sum_{j in N(i)} x_j.
  int neighbor_sum(int x, const Adjacency* adj);
  int add(int a, int b);
  int scale(int a, double s);
  int relu(int a);
  /// Row-wise standardization with learnable gain/offset vectors.
  int layer_norm(int x, int gain, int offset);
  /// Logits (m x 1) -> probabilities clamped into [eps, 1-eps].
  int sigmoid_clamp(int z, double eps = kProbEps);

  // Scalar-valued loss terms over a probability field (m x 1).
  int entropy_term(int q);
  int expected_energy_term(int q, const EnergyPoly* e);
  int cnd_noise_term(int q, const Assignment* x_t, double beta_t);
  int mf_log_prob_term(int q, const Assignment* x);

  int dot(int a, int b);
  int sum_all(int a);
  int mul(int a, int b);  // elementwise
  int exp_scalar(int a);
  /// c0 + sum_i coeffs[i] * parts[i] over scalar nodes.
  int combine(std::span<const int> parts, std::span<const double> coeffs, double c0 = 0.0);

  /// Seeds d(root)/d(root) = 1 and propagates; root must be scalar.
  void backward(int root);

  std::span<const double> value(int id) const;
  std::span<const double> adjoint(int id) const;
  double scalar(int id) const { return value(id)[0]; }

  int rows(int id) const { return nodes_[id].rows; }
  int cols(int id) const { return nodes_[id].cols; }

  /// Drop all nodes but keep arena capacity for reuse.
  void reset();

 private:
  enum class Op : std::uint8_t {
    Leaf, Const, Linear, NeighborSum, Add, Scale, Relu, LayerNorm, SigmoidClamp,
    Entropy, ExpectedEnergy, CndNoise, MfLogProb, Dot, Sum, Mul, Exp, Combine,
  };

  struct Node {
    Op op;
    bool needs_grad;
    int rows, cols;
    int val;            // offset into value arena
    int a = -1, b = -1, c = -1;
    int aux = -1;       // offset into double aux arena
    int iaux = -1;      // offset into int aux arena (combine parts)
    int count = 0;      // combine arity
    double d0 = 0.0;
    const void* ext = nullptr;
  };

  int push(Op op, int rows, int cols, bool needs_grad);
  double* val(int id) { return values_.data() + nodes_[id].val; }
  double* adj(int id) { return adjoints_.data() + nodes_[id].val; }
  const double* val(int id) const { return values_.data() + nodes_[id].val; }
  std::size_t size_of(int id) const {
    return std::size_t(nodes_[id].rows) * nodes_[id].cols;
  }
  void backward_node(int id);

  std::vector<Node> nodes_;
  std::vector<double> values_, adjoints_, aux_;
  std::vector<int> iaux_;
};

}  // namespace codiff::ad
