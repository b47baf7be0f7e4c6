#pragma once

// Test-side oracles: exhaustive enumerations, exact chain marginals and
// finite differences. These deliberately avoid the closed-form implementation
// paths they are used to check; everything here is brute force over 2^n
// states of tiny instances.

#include <cmath>
#include <functional>
#include <vector>

#include "codiff/baselines.hpp"
#include "codiff/diffusion.hpp"
#include "codiff/gnn.hpp"
#include "codiff/training.hpp"

namespace oracles {

using namespace codiff;

inline Assignment bits_of(std::uint64_t idx, int n) {
  Assignment x(n);
  for (int i = 0; i < n; ++i) x[i] = (idx >> i) & 1;
  return x;
}

inline double field_prob(const BernoulliField& q, const Assignment& x) {
  double p = 1.0;
  for (int i = 0; i < q.size(); ++i) p *= x[i] ? q.p[i] : 1.0 - q.p[i];
  return p;
}

inline double enum_expected_energy(const EnergyPoly& e, const BernoulliField& q) {
  double s = 0.0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << e.num_vars); ++idx) {
    const Assignment x = bits_of(idx, e.num_vars);
    s += field_prob(q, x) * energy_value(e, x);
  }
  return s;
}

inline double enum_entropy(const BernoulliField& q) {
  double s = 0.0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << q.size()); ++idx) {
    const double p = field_prob(q, bits_of(idx, q.size()));
    if (p > 0.0) s -= p * std::log(p);
  }
  return s;
}

inline double enum_cnd_expected_log_prob(const Assignment& x_t, const BernoulliField& q,
                                         double beta) {
  const int n = static_cast<int>(x_t.size());
  double s = 0.0;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << n); ++idx) {
    const Assignment prev = bits_of(idx, n);
    double logp = 0.0;
    for (int i = 0; i < n; ++i)
      logp += std::log(x_t[i] == prev[i] ? 1.0 - beta : beta);
    s += field_prob(q, prev) * logp;
  }
  return s;
}

inline double log_sum_exp(const std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// log Z of the Boltzmann distribution at inverse temperature beta.
inline double log_partition(const EnergyPoly& e, double beta) {
  std::vector<double> terms;
  for (std::uint64_t idx = 0; idx < (std::uint64_t{1} << e.num_vars); ++idx)
    terms.push_back(-beta * energy_value(e, bits_of(idx, e.num_vars)));
  return log_sum_exp(terms);
}

// ---------------------------------------------------------------------------
// Exact enumeration of the reverse chain of a tiny model (no random feats).

struct ChainEnum {
  int n = 0, t_steps = 0;
  // fields[s][state]: conditional the model emits at reverse step s (diffusion
  // time t = T - s) when conditioned on `state`.
  std::vector<std::vector<BernoulliField>> fields;
  // mu[s][state]: marginal distribution of x_{T-s}; mu[0] is uniform.
  std::vector<std::vector<double>> mu;
};

inline ChainEnum enumerate_chain(const gnn::ModelParams& params, const ProblemInstance& inst) {
  ChainEnum chain;
  chain.n = inst.num_nodes();
  chain.t_steps = params.cfg.t_steps;
  const std::uint64_t states = std::uint64_t{1} << chain.n;
  chain.mu.assign(chain.t_steps + 1, std::vector<double>(states, 0.0));
  for (std::uint64_t x = 0; x < states; ++x) chain.mu[0][x] = 1.0 / double(states);
  chain.fields.resize(chain.t_steps);
  for (int s = 0; s < chain.t_steps; ++s) {
    chain.fields[s].reserve(states);
    for (std::uint64_t x = 0; x < states; ++x) {
      const Assignment xa = bits_of(x, chain.n);
      gnn::StepInput in{&inst.adj, &xa, chain.t_steps - s, nullptr};
      chain.fields[s].push_back(gnn::forward(params, in));
    }
    for (std::uint64_t x = 0; x < states; ++x) {
      if (chain.mu[s][x] == 0.0) continue;
      for (std::uint64_t y = 0; y < states; ++y)
        chain.mu[s + 1][y] +=
            chain.mu[s][x] * field_prob(chain.fields[s][x], bits_of(y, chain.n));
    }
  }
  return chain;
}

/// D_KL(q_theta(x_0) || p_B(., 1/temperature)) by enumeration.
inline double exact_marginal_kl(const ChainEnum& chain, const EnergyPoly& e, double temperature) {
  const double beta = 1.0 / temperature;
  const double log_z = log_partition(e, beta);
  const std::uint64_t states = std::uint64_t{1} << chain.n;
  double kl = 0.0;
  for (std::uint64_t x = 0; x < states; ++x) {
    const double q = chain.mu[chain.t_steps][x];
    if (q == 0.0) continue;
    const double log_pb = -beta * energy_value(e, bits_of(x, chain.n)) - log_z;
    kl += q * (std::log(q) - log_pb);
  }
  return kl;
}

/// D_KL(q_theta(x_{0:T}) || p(x_{0:T})) by enumeration, with properly
/// normalized noise kernels on the forward side.
inline double exact_joint_kl(const ChainEnum& chain, const EnergyPoly& e,
                             const NoiseSchedule& schedule, double temperature) {
  const int n = chain.n, T = chain.t_steps;
  const double beta = 1.0 / temperature;
  const std::uint64_t states = std::uint64_t{1} << n;
  double kl = -n * std::log(2.0);  // E[log q(x_T)] of the uniform start
  for (int s = 0; s < T; ++s) {
    const int t = T - s;
    const double beta_t = schedule.beta(t);
    double log_zt = 0.0;
    if (schedule.kind == NoiseKind::Annealed) {
      std::vector<double> terms;
      for (std::uint64_t x = 0; x < states; ++x)
        terms.push_back(-beta * beta_t * energy_value(e, bits_of(x, n)));
      log_zt = log_sum_exp(terms);
    }
    for (std::uint64_t x = 0; x < states; ++x) {
      if (chain.mu[s][x] == 0.0) continue;
      const Assignment xa = bits_of(x, n);
      for (std::uint64_t y = 0; y < states; ++y) {
        const Assignment ya = bits_of(y, n);
        const double trans = field_prob(chain.fields[s][x], ya);
        if (trans == 0.0) continue;
        double log_noise;  // log p(x_t = xa | x_{t-1} = ya)
        if (schedule.kind == NoiseKind::Categorical) {
          log_noise = 0.0;
          for (int i = 0; i < n; ++i)
            log_noise += std::log(xa[i] == ya[i] ? 1.0 - beta_t : beta_t);
        } else {
          log_noise = -beta * beta_t * energy_value(e, xa) - log_zt;
        }
        kl += chain.mu[s][x] * trans * (std::log(trans) - log_noise);
      }
    }
  }
  const double log_z = log_partition(e, beta);
  for (std::uint64_t x = 0; x < states; ++x)
    kl -= chain.mu[T][x] * (-beta * energy_value(e, bits_of(x, n)) - log_z);
  return kl;
}

/// The additive constant between the implemented loss and
/// temperature * joint KL: T * (log Z_beta - N log 2 + sum_t log Z_t).
inline double loss_constant(const ChainEnum& chain, const EnergyPoly& e,
                            const NoiseSchedule& schedule, double temperature) {
  const double beta = 1.0 / temperature;
  double c = log_partition(e, beta) - chain.n * std::log(2.0);
  if (schedule.kind == NoiseKind::Annealed) {
    const std::uint64_t states = std::uint64_t{1} << chain.n;
    for (int t = 1; t <= chain.t_steps; ++t) {
      std::vector<double> terms;
      for (std::uint64_t x = 0; x < states; ++x)
        terms.push_back(-beta * schedule.beta(t) * energy_value(e, bits_of(x, chain.n)));
      c += log_sum_exp(terms);
    }
  }
  return temperature * c;
}

/// Exact loss value, computed the plain way: chain marginals plus raw
/// enumeration sums for every term. Rebuilds the chain, so it can be used as
/// the value function for finite differences.
inline double exact_loss_value(const gnn::ModelParams& params, const ProblemInstance& inst,
                               const NoiseSchedule& schedule, double temperature) {
  const ChainEnum chain = enumerate_chain(params, inst);
  const int n = chain.n, T = chain.t_steps;
  const std::uint64_t states = std::uint64_t{1} << n;
  double total = 0.0;
  for (int s = 0; s < T; ++s) {
    const int t = T - s;
    for (std::uint64_t x = 0; x < states; ++x) {
      const double w = chain.mu[s][x];
      if (w == 0.0) continue;
      total += w * -temperature * enum_entropy(chain.fields[s][x]);
      if (schedule.kind == NoiseKind::Categorical)
        total += w * -temperature *
                 enum_cnd_expected_log_prob(bits_of(x, n), chain.fields[s][x], schedule.beta(t));
    }
    if (schedule.kind == NoiseKind::Annealed) {
      // Temperature-cancelled noise term: beta_t * E[H(x_t)] over the marginal.
      for (std::uint64_t x = 0; x < states; ++x)
        total += schedule.beta(t) * chain.mu[s][x] * energy_value(inst.energy, bits_of(x, n));
    }
  }
  for (std::uint64_t x = 0; x < states; ++x)
    total += chain.mu[T][x] * energy_value(inst.energy, bits_of(x, n));
  return total;
}

/// Exact gradient of the loss above via one tape that differentiates through
/// the chain marginals directly (product rule through the probability
/// weights), as an algebraically independent route from the score-function
/// estimator.
inline std::vector<double> exact_loss_grad(const gnn::ModelParams& params,
                                           const ProblemInstance& inst,
                                           const NoiseSchedule& schedule, double temperature) {
  const int n = inst.num_nodes(), T = params.cfg.t_steps;
  const std::uint64_t states = std::uint64_t{1} << n;
  ad::Tape tape;
  const gnn::ParamLeaves leaves = gnn::register_params(tape, params);

  std::vector<Assignment> state_bits;
  for (std::uint64_t x = 0; x < states; ++x) state_bits.push_back(bits_of(x, n));

  std::vector<int> mu(states);  // node ids of current marginal weights
  for (std::uint64_t x = 0; x < states; ++x) mu[x] = tape.scalar_constant(1.0 / double(states));

  std::vector<int> parts;
  std::vector<double> coeffs;
  std::vector<int> field_nodes(states);
  for (int s = 0; s < T; ++s) {
    const int t = T - s;
    for (std::uint64_t x = 0; x < states; ++x) {
      gnn::StepInput in{&inst.adj, &state_bits[x], t, nullptr};
      field_nodes[x] = gnn::forward_on_tape(tape, leaves, params.cfg, in);
      parts.push_back(tape.mul(mu[x], tape.entropy_term(field_nodes[x])));
      coeffs.push_back(-temperature);
      if (schedule.kind == NoiseKind::Categorical) {
        parts.push_back(
            tape.mul(mu[x], tape.cnd_noise_term(field_nodes[x], &state_bits[x], schedule.beta(t))));
        coeffs.push_back(-temperature);
      } else {
        parts.push_back(mu[x]);
        coeffs.push_back(schedule.beta(t) * energy_value(inst.energy, state_bits[x]));
      }
    }
    // Propagate the marginal one step.
    std::vector<int> next(states);
    std::vector<int> acc;
    std::vector<double> ones;
    for (std::uint64_t y = 0; y < states; ++y) {
      acc.clear();
      ones.clear();
      for (std::uint64_t x = 0; x < states; ++x) {
        const int p = tape.exp_scalar(tape.mf_log_prob_term(field_nodes[x], &state_bits[y]));
        acc.push_back(tape.mul(mu[x], p));
        ones.push_back(1.0);
      }
      next[y] = tape.combine(acc, ones);
    }
    if (s == T - 1)
      for (std::uint64_t x = 0; x < states; ++x) {
        parts.push_back(tape.mul(mu[x], tape.expected_energy_term(field_nodes[x], &inst.energy)));
        coeffs.push_back(1.0);
      }
    mu = std::move(next);
  }
  const int root = tape.combine(parts, coeffs);
  tape.backward(root);
  std::vector<double> grad;
  gnn::harvest_param_grads(tape, leaves, params.cfg, grad);
  return grad;
}

/// Average of the production gradient estimator over the entire enumerated
/// trajectory space, with the exact mean as the baseline.
inline std::vector<double> enum_estimator_average(const gnn::ModelParams& params,
                                                  const ProblemInstance& inst,
                                                  const NoiseSchedule& schedule,
                                                  double temperature) {
  const ChainEnum chain = enumerate_chain(params, inst);
  const int n = chain.n, T = chain.t_steps;
  const std::uint64_t states = std::uint64_t{1} << n;
  std::uint64_t count = 1;
  for (int s = 0; s <= T; ++s) count *= states;

  auto build_traj = [&](std::uint64_t code) {
    Trajectory traj;
    std::uint64_t c = code;
    std::vector<std::uint64_t> idx(T + 1);
    for (int s = 0; s <= T; ++s) {
      idx[s] = c % states;
      c /= states;
    }
    double weight = 1.0 / double(states);
    for (int s = 0; s <= T; ++s) traj.states.push_back(bits_of(idx[s], n));
    for (int s = 0; s < T; ++s) {
      const BernoulliField& f = chain.fields[s][idx[s]];
      weight *= field_prob(f, traj.states[s + 1]);
      traj.fields.push_back(f);
      traj.step_entropy.push_back(entropy(f));
      traj.log_q += mf_log_prob(f, traj.states[s + 1]);
    }
    traj.final_energy = energy_value(inst.energy, traj.states.back());
    return std::make_pair(traj, weight);
  };

  // Exact per-term baselines, then the production causal reward-to-go
  // weighting averaged over every trajectory with its exact probability.
  std::vector<double> baselines(T, 0.0);
  std::vector<std::vector<double>> terms(count);
  std::vector<double> weights(count);
  for (std::uint64_t code = 0; code < count; ++code) {
    auto [traj, w] = build_traj(code);
    terms[code] = train::trajectory_loss_terms(traj, inst.energy, temperature, schedule);
    weights[code] = w;
    for (int s = 0; s < T; ++s) baselines[s] += w * terms[code][s];
  }

  std::vector<double> grad(gnn::param_count(params.cfg), 0.0);
  const std::uint64_t chunk = 2048;
  std::vector<Trajectory> batch;
  std::vector<double> pw, sw;
  for (std::uint64_t start = 0; start < count; start += chunk) {
    batch.clear();
    pw.clear();
    sw.clear();
    for (std::uint64_t code = start; code < std::min(count, start + chunk); ++code) {
      if (weights[code] == 0.0) continue;
      batch.push_back(build_traj(code).first);
      pw.push_back(weights[code]);
      double to_go = 0.0;
      sw.resize(sw.size() + T);
      for (int s = T - 1; s >= 0; --s) {
        sw[sw.size() - T + s] = weights[code] * to_go;
        to_go += terms[code][s] - baselines[s];
      }
    }
    if (batch.empty()) continue;
    const auto g = train::estimate_gradient_weighted(params, inst, batch, pw, sw, temperature,
                                                     schedule);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
  }
  return grad;
}

/// Central finite differences of an arbitrary scalar function of the
/// parameters, on selected coordinates.
inline std::vector<double> fd_gradient(
    const std::function<double(const gnn::ModelParams&)>& f, const gnn::ModelParams& params,
    const std::vector<std::size_t>& coords, double h) {
  std::vector<double> out;
  gnn::ModelParams p = params;
  for (std::size_t c : coords) {
    const double saved = p.flat[c];
    p.flat[c] = saved + h;
    const double up = f(p);
    p.flat[c] = saved - h;
    const double down = f(p);
    p.flat[c] = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

}  // namespace oracles
