#pragma once

#include <string>
#include <vector>

#include "codiff/energy.hpp"
#include "codiff/gnn.hpp"

namespace codiff::decode {

struct DecodeMode {
  enum Kind { Raw, CE, CeSt } kind = CE;
  int token = 8;  // block size for CeSt
};

/// Parses "raw", "ce" or "ce-st:<k>".
DecodeMode decode_mode_from_string(const std::string& s);
std::string to_string(const DecodeMode& m);

struct ReverseSample {
  Assignment x0;
  BernoulliField final_field;  // the conditional x0 was sampled from
};

/// Extended-schedule time-conditioning index for reverse step t (counting
/// down from n_repeat * t_train to 1): ceil(t / n_repeat) clamped to
/// [1, t_train]. n_repeat = 1 reproduces the training schedule exactly.
int eval_condition_index(int t, int n_repeat, int t_train);

/// Run n_repeat * t_train reverse steps from the stationary distribution,
/// repeating each training time index n_repeat times.
std::vector<ReverseSample> reverse_sample(const gnn::ModelParams& params,
                                          const ProblemInstance& inst, int n_repeat,
                                          int n_samples, Rng& rng);

/// Greedy derandomization: pin variables in descending-probability order to
/// whichever value has the lower expected energy given everything pinned so
/// far. The result never exceeds the field's expected energy (up to rounding).
Assignment conditional_expectation(const BernoulliField& q, const EnergyPoly& e);

/// Tokenized variant: consume the sorted order in blocks of k and pick the
/// best of the 2^k block configurations. k = 1 is bit-identical to
/// conditional_expectation; k >= n is an exhaustive search.
Assignment ce_st(const BernoulliField& q, const EnergyPoly& e, int k);

struct SolveStats {
  Assignment best;
  double best_energy = 0.0;
  std::vector<double> energies;
  std::vector<double> sizes;
  std::vector<char> feasible;
  double wall_ms = 0.0;  // forward passes + decoding only
};

SolveStats solve(const gnn::ModelParams& params, const ProblemInstance& inst, int n_samples,
                 int n_repeat, const DecodeMode& mode, Rng& rng);

}  // namespace codiff::decode
