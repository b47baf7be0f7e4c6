#include "codiff/training.hpp"

#include <cmath>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "codiff/kernels.hpp"

namespace codiff::train {

TrainConfig preset(const std::string& name) {
  TrainConfig c;
  auto set = [&](double lr, double ts, int layers, int t, int anneal, NoiseKind nk, int mw,
                 int mkl, bool rf, ProblemKind pk, int hidden = 64) {
    c.lr = lr;
    c.t_start = ts;
    c.layers = layers;
    c.t_steps = t;
    c.n_anneal = anneal;
    c.noise = nk;
    c.m_omega = mw;
    c.m_kl = mkl;
    c.random_feats = rf;
    c.problem = pk;
    c.hidden = hidden;
  };
  using NK = NoiseKind;
  using PK = ProblemKind;
  if (name == "rb-large-mis") set(0.002, 0.3, 7, 4, 3000, NK::Annealed, 18, 5, true, PK::MIS);
  else if (name == "rb-small-mis") set(0.002, 0.4, 8, 6, 4000, NK::Annealed, 30, 10, true, PK::MIS);
  else if (name == "rb-small-maxcl") set(0.002, 0.5, 8, 5, 3000, NK::Categorical, 20, 8, false, PK::MaxCl);
  else if (name == "ba-large-maxcut") set(0.002, 0.2, 4, 6, 1000, NK::Annealed, 20, 10, false, PK::MaxCut);
  else if (name == "ba-small-maxcut") set(0.002, 0.2, 8, 4, 2000, NK::Annealed, 20, 10, false, PK::MaxCut);
  else if (name == "ba-large-mds") set(0.003, 0.3, 8, 3, 2000, NK::Annealed, 20, 10, false, PK::MDS);
  else if (name == "ba-small-mds") set(0.003, 0.3, 8, 5, 2000, NK::Annealed, 20, 10, false, PK::MDS);
  else if (name == "rb-200-mvc") set(0.001, 0.4, 8, 4, 4500, NK::Annealed, 30, 10, true, PK::MVC);
  else if (name == "er15-mis-desk") set(0.002, 0.4, 4, 4, 500, NK::Categorical, 8, 8, false, PK::MIS, 32);
  else throw data_error("unknown preset: " + name);
  return c;
}

std::vector<std::string> preset_names() {
  return {"rb-large-mis",    "rb-small-mis", "rb-small-maxcl", "ba-large-maxcut",
          "ba-small-maxcut", "ba-large-mds", "ba-small-mds",   "rb-200-mvc",
          "er15-mis-desk"};
}

std::string config_to_json(const TrainConfig& cfg) {
  nlohmann::ordered_json j;
  j["t_steps"] = cfg.t_steps;
  j["layers"] = cfg.layers;
  j["hidden"] = cfg.hidden;
  j["lr"] = cfg.lr;
  j["t_start"] = cfg.t_start;
  j["n_anneal"] = cfg.n_anneal;
  j["m_omega"] = cfg.m_omega;
  j["m_kl"] = cfg.m_kl;
  j["noise"] = to_string(cfg.noise);
  j["seed"] = cfg.seed;
  j["clip_norm"] = cfg.clip_norm;
  j["random_feats"] = cfg.random_feats;
  j["problem"] = to_string(cfg.problem);
  j["penalty_a"] = cfg.penalty_a;
  j["penalty_b"] = cfg.penalty_b;
  j["threads"] = cfg.threads;
  return j.dump(1);
}

TrainConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("malformed config " + path + ": " + e.what());
  }
  TrainConfig cfg;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "t_steps") cfg.t_steps = it->get<int>();
      else if (k == "layers") cfg.layers = it->get<int>();
      else if (k == "hidden") cfg.hidden = it->get<int>();
      else if (k == "lr") cfg.lr = it->get<double>();
      else if (k == "t_start") cfg.t_start = it->get<double>();
      else if (k == "n_anneal") cfg.n_anneal = it->get<int>();
      else if (k == "m_omega") cfg.m_omega = it->get<int>();
      else if (k == "m_kl") cfg.m_kl = it->get<int>();
      else if (k == "noise") cfg.noise = noise_kind_from_string(it->get<std::string>());
      else if (k == "seed") cfg.seed = it->get<std::uint64_t>();
      else if (k == "clip_norm") cfg.clip_norm = it->get<double>();
      else if (k == "random_feats") cfg.random_feats = it->get<bool>();
      else if (k == "problem") cfg.problem = problem_kind_from_string(it->get<std::string>());
      else if (k == "penalty_a") cfg.penalty_a = it->get<double>();
      else if (k == "penalty_b") cfg.penalty_b = it->get<double>();
      else if (k == "threads") cfg.threads = it->get<int>();
      else throw data_error("config " + path + ": unknown key \"" + k + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw data_error("config " + path + ": " + e.what());
  }
  if (cfg.t_steps < 1 || cfg.layers < 1 || cfg.hidden < 1 || cfg.n_anneal < 1 ||
      cfg.m_omega < 1 || cfg.m_kl < 1 || cfg.lr <= 0.0 || cfg.t_start < 0.0)
    throw data_error("config " + path + ": values out of range");
  return cfg;
}

std::vector<Trajectory> rollout(const gnn::ModelParams& params, const ProblemInstance& inst,
                                const NoiseSchedule& schedule, int m_kl, Rng& rng) {
  if (schedule.t_steps != params.cfg.t_steps)
    throw std::invalid_argument("rollout: schedule/model step count mismatch");
  if (m_kl < 1) throw std::invalid_argument("rollout: m_kl must be >= 1");
  const int t_steps = schedule.t_steps;
  const int n = inst.num_nodes();
  std::vector<Trajectory> trajs;
  trajs.reserve(m_kl);
  for (int k = 0; k < m_kl; ++k) {
    Rng stream = rng.fork(0x726f6c6cull, k);  // disjoint stream per sample
    Trajectory traj;
    if (params.cfg.random_feats) {
      traj.rand_feats.resize(std::size_t(n) * gnn::kNumRandomFeats);
      for (double& f : traj.rand_feats) f = stream.uniform();
    }
    traj.states.push_back(sample_stationary(n, stream));
    for (int s = 0; s < t_steps; ++s) {
      const int t = t_steps - s;
      gnn::StepInput in{&inst.adj, &traj.states[s], t,
                        traj.rand_feats.empty() ? nullptr : traj.rand_feats.data()};
      BernoulliField field = gnn::forward(params, in);
      Assignment next = mf_sample(field, stream);
      traj.log_q += mf_log_prob(field, next);
      traj.step_entropy.push_back(entropy(field));
      traj.fields.push_back(std::move(field));
      traj.states.push_back(std::move(next));
    }
    for (int s = 0; s < t_steps; ++s) {
      const double beta_t = schedule.beta(t_steps - s);
      traj.step_noise_logp.push_back(
          schedule.kind == NoiseKind::Categorical
              ? cnd_log_prob(traj.states[s], traj.states[s + 1], beta_t)
              : and_log_prob_unnormalized(traj.states[s], inst.energy, schedule.beta_target,
                                          beta_t));
    }
    traj.final_energy = energy_value(inst.energy, traj.states.back());
    trajs.push_back(std::move(traj));
  }
  return trajs;
}

namespace {

// Per-field coefficients of the trajectory loss. fields[s] is the conditional
// at diffusion time t = T - s; the annealed-noise term for X_t attaches to the
// field X_t was sampled from, and the temperature cancels against 1/T there.
struct FieldCoeffs {
  double entropy;     // on S(fields[s])
  double cnd;         // on E[log p(x_t | X_prev)] under fields[s]
  double energy;      // on E[H] under fields[s]
};

FieldCoeffs field_coeffs(int s, int t_steps, double temperature, const NoiseSchedule& schedule) {
  FieldCoeffs c{-temperature, 0.0, 0.0};
  if (schedule.kind == NoiseKind::Categorical) {
    c.cnd = -temperature;
  } else if (s <= t_steps - 2) {
    c.energy += schedule.beta(t_steps - 1 - s);
  }
  if (s == t_steps - 1) c.energy += 1.0;
  return c;
}

}  // namespace

std::vector<double> trajectory_loss_terms(const Trajectory& traj, const EnergyPoly& energy,
                                          double temperature, const NoiseSchedule& schedule) {
  const int t_steps = traj.t_steps();
  if (t_steps != schedule.t_steps)
    throw std::invalid_argument("trajectory_loss_terms: step mismatch");
  std::vector<double> terms(t_steps, 0.0);
  for (int s = 0; s < t_steps; ++s) {
    const FieldCoeffs c = field_coeffs(s, t_steps, temperature, schedule);
    terms[s] += c.entropy * traj.step_entropy[s];
    if (c.cnd != 0.0)
      terms[s] += c.cnd * cnd_expected_log_prob(traj.states[s], traj.fields[s],
                                                schedule.beta(t_steps - s));
    if (c.energy != 0.0) terms[s] += c.energy * expected_energy(energy, traj.fields[s]);
  }
  return terms;
}

double trajectory_loss(const Trajectory& traj, const EnergyPoly& energy, double temperature,
                       const NoiseSchedule& schedule) {
  double total = 0.0;
  for (double t : trajectory_loss_terms(traj, energy, temperature, schedule)) total += t;
  // Stationary boundary of the annealed noise: raw value, and exactly zero
  // under the linear schedule since beta(T) = 0.
  if (schedule.kind == NoiseKind::Annealed)
    total += schedule.beta(traj.t_steps()) * energy_value(energy, traj.states[0]);
  return total;
}

LossBreakdown loss_terms(std::span<const Trajectory> trajs, const EnergyPoly& energy,
                         double temperature, const NoiseSchedule& schedule) {
  if (trajs.empty()) throw std::invalid_argument("loss_terms: empty batch");
  LossBreakdown out;
  const int t_steps = schedule.t_steps;
  for (const Trajectory& traj : trajs) {
    if (traj.t_steps() != t_steps) throw std::invalid_argument("loss_terms: step mismatch");
    for (int s = 0; s < t_steps; ++s) {
      out.entropy_term += -temperature * traj.step_entropy[s];
      if (schedule.kind == NoiseKind::Categorical) {
        out.noise_term += -temperature * cnd_expected_log_prob(traj.states[s], traj.fields[s],
                                                               schedule.beta(t_steps - s));
      } else {
        if (s <= t_steps - 2)
          out.noise_term +=
              schedule.beta(t_steps - 1 - s) * expected_energy(energy, traj.fields[s]);
      }
    }
    if (schedule.kind == NoiseKind::Annealed)
      out.noise_term += schedule.beta(t_steps) * energy_value(energy, traj.states[0]);
    out.energy_term += expected_energy(energy, traj.fields[t_steps - 1]);
  }
  const double inv = 1.0 / double(trajs.size());
  out.entropy_term *= inv;
  out.noise_term *= inv;
  out.energy_term *= inv;
  out.total = out.entropy_term + out.noise_term + out.energy_term;
  return out;
}

std::vector<double> estimate_gradient_weighted(const gnn::ModelParams& params,
                                               const ProblemInstance& inst,
                                               std::span<const Trajectory> trajs,
                                               std::span<const double> pathwise_w,
                                               std::span<const double> score_w,
                                               double temperature, const NoiseSchedule& schedule) {
  const int t_steps = schedule.t_steps;
  if (trajs.size() != pathwise_w.size() || trajs.size() * t_steps != score_w.size())
    throw std::invalid_argument("estimate_gradient_weighted: weight arity mismatch");
  std::vector<double> grad(gnn::param_count(params.cfg), 0.0);
  thread_local ad::Tape tape;
  for (std::size_t k = 0; k < trajs.size(); ++k) {
    const Trajectory& traj = trajs[k];
    const double u = pathwise_w[k];
    for (int s = 0; s < t_steps; ++s) {
      const double w = score_w[k * t_steps + s];
      if (u == 0.0 && w == 0.0) continue;
      const FieldCoeffs c = field_coeffs(s, t_steps, temperature, schedule);
      tape.reset();
      const gnn::ParamLeaves leaves = gnn::register_params(tape, params);
      gnn::StepInput in{&inst.adj, &traj.states[s], t_steps - s,
                        traj.rand_feats.empty() ? nullptr : traj.rand_feats.data()};
      const int q = gnn::forward_on_tape(tape, leaves, params.cfg, in);
      std::vector<int> parts;
      std::vector<double> coeffs;
      if (u != 0.0) {
        if (c.entropy != 0.0) {
          parts.push_back(tape.entropy_term(q));
          coeffs.push_back(u * c.entropy);
        }
        if (c.cnd != 0.0) {
          parts.push_back(tape.cnd_noise_term(q, &traj.states[s], schedule.beta(t_steps - s)));
          coeffs.push_back(u * c.cnd);
        }
        if (c.energy != 0.0) {
          parts.push_back(tape.expected_energy_term(q, &inst.energy));
          coeffs.push_back(u * c.energy);
        }
      }
      if (w != 0.0) {
        parts.push_back(tape.mf_log_prob_term(q, &traj.states[s + 1]));
        coeffs.push_back(w);
      }
      if (parts.empty()) continue;
      const int root = tape.combine(parts, coeffs);
      if (!std::isfinite(tape.scalar(root)))
        throw numeric_error("estimate_gradient: non-finite loss term");
      tape.backward(root);
      gnn::harvest_param_grads(tape, leaves, params.cfg, grad);
    }
  }
  for (double v : grad)
    if (!std::isfinite(v)) throw numeric_error("estimate_gradient: non-finite gradient");
  return grad;
}

std::vector<double> estimate_gradient(const gnn::ModelParams& params, const ProblemInstance& inst,
                                      std::span<const Trajectory> trajs, double temperature,
                                      const NoiseSchedule& schedule) {
  const std::size_t m = trajs.size();
  if (m == 0) throw std::invalid_argument("estimate_gradient: empty batch");
  const int t_steps = schedule.t_steps;
  std::vector<std::vector<double>> terms(m);
  std::vector<double> baselines(t_steps, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    terms[k] = trajectory_loss_terms(trajs[k], inst.energy, temperature, schedule);
    for (int s = 0; s < t_steps; ++s) baselines[s] += terms[k][s] / double(m);
  }
  // Causal reward-to-go: transition s only carries the centered loss terms
  // that are sampled after it.
  std::vector<double> pathwise(m, 1.0 / double(m));
  std::vector<double> score(m * t_steps, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double to_go = 0.0;
    for (int s = t_steps - 1; s >= 0; --s) {
      score[k * t_steps + s] = to_go / double(m);
      to_go += terms[k][s] - baselines[s];
    }
  }
  return estimate_gradient_weighted(params, inst, trajs, pathwise, score, temperature, schedule);
}

double temperature(int step, double t_start, int n_anneal) {
  if (step < 0) throw std::invalid_argument("temperature: negative step");
  const double frac = 1.0 - double(step) / double(n_anneal);
  return t_start * (frac > 0.0 ? frac : 0.0);
}

double clip_global_norm(std::vector<double>& grad, double max_norm) {
  const double norm =
      std::sqrt(kern::ops().sumsq(grad.data(), static_cast<int>(grad.size())));
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

void RAdam::step(std::vector<double>& params, const std::vector<double>& grad) {
  if (params.size() != grad.size()) throw std::invalid_argument("radam: size mismatch");
  if (m.empty()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
  }
  ++t;
  const double b1t = std::pow(beta1, double(t));
  const double b2t = std::pow(beta2, double(t));
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double rho_t = rho_inf - 2.0 * double(t) * b2t / (1.0 - b2t);
  double rect = 0.0;
  const bool rectified = rho_t > 4.0;
  if (rectified)
    rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                     ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = m[i] / (1.0 - b1t);
    if (rectified)
      params[i] -= lr * rect * mhat / (std::sqrt(v[i] / (1.0 - b2t)) + eps);
    else
      params[i] -= lr * mhat;
  }
}

TrainResult train(const TrainConfig& cfg, const std::vector<DatasetRecord>& records,
                  std::ostream* log_stream) {
  if (records.empty()) throw std::invalid_argument("train: empty dataset");
  std::vector<ProblemInstance> instances;
  instances.reserve(records.size());
  for (const auto& r : records)
    instances.emplace_back(r.graph, cfg.problem, cfg.penalty_a, cfg.penalty_b);

  TrainResult result;
  result.params = gnn::init_params(cfg.seed, cfg.gnn());
  const NoiseSchedule schedule = cfg.schedule();
  RAdam opt(cfg.lr);
  Rng root(cfg.seed);
  std::vector<double> grad(result.params.flat.size());

  const int threads = std::max(1, cfg.threads);
  std::vector<std::vector<double>> batch_grads(cfg.m_omega);
  std::vector<LossBreakdown> batch_losses(cfg.m_omega);

  for (int step = 0; step < cfg.n_anneal; ++step) {
    const double temp = temperature(step, cfg.t_start, cfg.n_anneal);
    Rng batch_rng = root.fork(0xb417c4ull, step);
    std::vector<std::size_t> picks(cfg.m_omega);
    for (auto& idx : picks) idx = batch_rng.uniform_int(instances.size());

    // Per-instance work is independent; the reduction below runs in batch
    // order, so the result does not depend on the thread count.
    auto run_range = [&](int begin, int end) {
      for (int b = begin; b < end; ++b) {
        Rng roll_rng = root.fork(0x9011ull, step, std::uint64_t(b));
        const auto& inst = instances[picks[b]];
        const auto trajs = rollout(result.params, inst, schedule, cfg.m_kl, roll_rng);
        batch_losses[b] = loss_terms(trajs, inst.energy, temp, schedule);
        batch_grads[b] = estimate_gradient(result.params, inst, trajs, temp, schedule);
      }
    };
    if (threads == 1 || cfg.m_omega == 1) {
      run_range(0, cfg.m_omega);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (cfg.m_omega + threads - 1) / threads;
      for (int t = 0; t < threads; ++t) {
        const int b = std::min(cfg.m_omega, t * chunk), e = std::min(cfg.m_omega, b + chunk);
        if (b < e) pool.emplace_back(run_range, b, e);
      }
      for (auto& th : pool) th.join();
    }

    std::fill(grad.begin(), grad.end(), 0.0);
    LossBreakdown agg;
    for (int b = 0; b < cfg.m_omega; ++b) {
      agg.entropy_term += batch_losses[b].entropy_term / cfg.m_omega;
      agg.noise_term += batch_losses[b].noise_term / cfg.m_omega;
      agg.energy_term += batch_losses[b].energy_term / cfg.m_omega;
      kern::ops().axpy(grad.data(), batch_grads[b].data(), 1.0 / cfg.m_omega,
                       static_cast<int>(grad.size()));
    }
    agg.total = agg.entropy_term + agg.noise_term + agg.energy_term;
    if (!std::isfinite(agg.total))
      throw numeric_error("train: non-finite loss at step " + std::to_string(step));
    const double norm = clip_global_norm(grad, cfg.clip_norm);
    opt.step(result.params.flat, grad);
    const StepLog row{step, temp, agg.entropy_term, agg.noise_term, agg.energy_term,
                      agg.total, norm};
    result.log.push_back(row);
    if (log_stream) {
      nlohmann::ordered_json j;
      j["step"] = row.step;
      j["temperature"] = row.temperature;
      j["entropy_term"] = row.entropy_term;
      j["noise_term"] = row.noise_term;
      j["energy_term"] = row.energy_term;
      j["total"] = row.total;
      j["grad_norm"] = row.grad_norm;
      *log_stream << j.dump() << '\n';
    }
  }
  return result;
}

}  // namespace codiff::train
