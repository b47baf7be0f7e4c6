#pragma once

#include <functional>
#include <string>
#include <vector>

#include "codiff/autodiff.hpp"
#include "codiff/diffusion.hpp"
#include "codiff/graph.hpp"

namespace codiff::gnn {

/// Architecture of the time-conditioned message-passing network. Node features
/// are [current bit, one-hot of the diffusion step, optional 5 random feats].
struct GnnConfig {
  int layers = 4;
  int hidden = 32;
  int t_steps = 4;
  bool random_feats = false;

  int feature_width() const { return 1 + t_steps + (random_feats ? 5 : 0); }
};

inline constexpr int kNumRandomFeats = 5;

struct BlockSpec {
  std::string name;
  int rows = 0, cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return std::size_t(rows) * cols; }
};

std::vector<BlockSpec> param_layout(const GnnConfig& cfg);
std::size_t param_count(const GnnConfig& cfg);

struct ModelParams {
  GnnConfig cfg;
  std::vector<double> flat;  // all blocks, in layout order
};

/// Fan-scaled uniform init for weights, zero biases, unit normalization gains.
ModelParams init_params(std::uint64_t seed, const GnnConfig& cfg);

struct StepInput {
  const Adjacency* adj = nullptr;
  const Assignment* x_t = nullptr;
  int t_index = 1;                  // 1..t_steps
  const double* rand_feats = nullptr;  // row-major N x 5, or null
};

struct ParamLeaves {
  std::vector<int> ids;  // one tape leaf per block, layout order
};

ParamLeaves register_params(ad::Tape& tape, const ModelParams& p);

/// Builds the forward pass on the tape and returns the probability-field node
/// (N x 1, clamped). Output is permutation-equivariant in the node order.
int forward_on_tape(ad::Tape& tape, const ParamLeaves& leaves, const GnnConfig& cfg,
                    const StepInput& in);

/// Plain forward pass; uses a scratch tape internally.
BernoulliField forward(const ModelParams& p, const StepInput& in);

/// Add the parameter adjoints recorded on the tape into a flat gradient.
void harvest_param_grads(const ad::Tape& tape, const ParamLeaves& leaves, const GnnConfig& cfg,
                         std::vector<double>& grad);

/// Exact reverse-mode gradient of a scalar closure built from forward passes
/// and the loss terms of this library. Throws numeric_error on a non-finite
/// loss value.
using LossClosure = std::function<int(ad::Tape&, const ParamLeaves&)>;
std::vector<double> grad(const ModelParams& p, const LossClosure& closure);

/// Model checkpoint: parameters plus the run metadata evaluation needs.
struct Checkpoint {
  ModelParams params;
  NoiseKind noise = NoiseKind::Categorical;
  ProblemKind problem = ProblemKind::MIS;
  double penalty_a = 1.0, penalty_b = 1.01;
};

/// JSON checkpoint with a shape manifest; round-trips doubles exactly.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace codiff::gnn
