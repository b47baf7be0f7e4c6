#pragma once

#include <vector>

#include "codiff/energy.hpp"
#include "codiff/rng.hpp"
#include "codiff/types.hpp"

namespace codiff {

enum class NoiseKind { Categorical, Annealed };

const char* to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

/// Forward-process flip probability of the categorical noise kernel,
/// beta_t = 1 / (T - t + 2) for t in [1, T]; the last step is exactly uniform.
double cnd_beta(int t, int t_steps);

/// Annealed-noise inverse-temperature factor, beta_t = 1 - t/T.
double and_beta(int t, int t_steps);

struct NoiseSchedule {
  NoiseKind kind = NoiseKind::Categorical;
  int t_steps = 1;
  double beta_target = 1.0;  // inverse temperature scale of the annealed kernel

  double beta(int t) const {
    return kind == NoiseKind::Categorical ? cnd_beta(t, t_steps) : and_beta(t, t_steps);
  }
};

/// log p(x_t | x_prev) under the bitwise flip kernel.
double cnd_log_prob(const Assignment& x_t, const Assignment& x_prev, double beta_t);

/// Exact E_{X_prev ~ q}[ log p(x_t | X_prev) ] in closed form.
double cnd_expected_log_prob(const Assignment& x_t, const BernoulliField& q_prev, double beta_t);

/// Unnormalized annealed-noise log probability, -beta * beta_t * H(x_t);
/// independent of the previous state by construction.
double and_log_prob_unnormalized(const Assignment& x_t, const EnergyPoly& e, double beta,
                                 double beta_t);

/// Exact expectation of the unnormalized annealed-noise log probability over
/// X_t ~ q, i.e. -beta * beta_t * E[H].
double and_expected_log_prob(const BernoulliField& q_t, const EnergyPoly& e, double beta,
                             double beta_t);

/// Shannon entropy of the product-Bernoulli field, in nats.
double entropy(const BernoulliField& q);

Assignment mf_sample(const BernoulliField& q, Rng& rng);
double mf_log_prob(const BernoulliField& q, const Assignment& x);

/// Uniform state over {0,1}^n — the stationary distribution of both kernels.
Assignment sample_stationary(int n, Rng& rng);

/// One reverse-process sample path. states[0] is the stationary draw x_T and
/// states[T] the final solution x_0; fields[s] is the conditional field the
/// model produced from states[s] (diffusion time t = T - s), which states[s+1]
/// was sampled from.
struct Trajectory {
  std::vector<Assignment> states;
  std::vector<BernoulliField> fields;
  double log_q = 0.0;                       // sum of per-transition mean-field log probs
  std::vector<double> step_entropy;         // S(fields[s])
  std::vector<double> step_noise_logp;      // log p(x_t|x_{t-1}) at the sampled states
  double final_energy = 0.0;                // H(states[T])
  std::vector<double> rand_feats;           // per-node extra features, fixed per rollout

  int t_steps() const { return static_cast<int>(fields.size()); }
};

}  // namespace codiff
