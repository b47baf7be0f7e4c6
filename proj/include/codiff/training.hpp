#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "codiff/dataset.hpp"
#include "codiff/diffusion.hpp"
#include "codiff/gnn.hpp"

namespace codiff::train {

struct TrainConfig {
  int t_steps = 4;
  int layers = 4;
  int hidden = 32;
  double lr = 2e-3;
  double t_start = 0.4;  // annealing start temperature
  int n_anneal = 500;    // total gradient steps; temperature reaches 0 at the last one
  int m_omega = 8;       // problem instances per step
  int m_kl = 8;          // reverse-process samples per instance
  NoiseKind noise = NoiseKind::Categorical;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  bool random_feats = false;
  ProblemKind problem = ProblemKind::MIS;
  double penalty_a = 1.0, penalty_b = 1.01;
  int threads = 1;

  gnn::GnnConfig gnn() const { return {layers, hidden, t_steps, random_feats}; }
  NoiseSchedule schedule() const { return {noise, t_steps, 1.0}; }
};

/// Named hyperparameter presets for the benchmark datasets, plus a small
/// "er15-mis-desk" configuration that trains in minutes on a laptop CPU.
TrainConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Flat JSON config with exact TrainConfig field names; unknown keys are hard
/// errors so typos cannot silently fall back to defaults.
TrainConfig config_from_json_file(const std::string& path);
std::string config_to_json(const TrainConfig& cfg);

/// Loss pieces of one step, already multiplied by their temperature factors so
/// that total = entropy_term + noise_term + energy_term (additive constants
/// from the noise normalizers and the partition function are dropped).
struct LossBreakdown {
  double entropy_term = 0.0;  // -T * sum_t E[S]
  double noise_term = 0.0;    // -T * sum_t E[log p(X_t|X_{t-1})], temperature-cancelled for annealed noise
  double energy_term = 0.0;   // E[H] through the final conditional field
  double total = 0.0;
};

/// Sample m_kl reverse trajectories from the stationary distribution, caching
/// every conditional field and per-step statistics.
std::vector<Trajectory> rollout(const gnn::ModelParams& params, const ProblemInstance& inst,
                                const NoiseSchedule& schedule, int m_kl, Rng& rng);

/// Per-step pieces of the trajectory loss: terms[s] groups everything the
/// conditional field at reverse step s contributes (entropy, noise, energy).
/// Their sum plus the parameter-free stationary boundary term is the full
/// per-trajectory loss estimate.
std::vector<double> trajectory_loss_terms(const Trajectory& traj, const EnergyPoly& energy,
                                          double temperature, const NoiseSchedule& schedule);

/// The per-trajectory loss estimate (closed-form expectations per cached field).
double trajectory_loss(const Trajectory& traj, const EnergyPoly& energy, double temperature,
                       const NoiseSchedule& schedule);

LossBreakdown loss_terms(std::span<const Trajectory> trajs, const EnergyPoly& energy,
                         double temperature, const NoiseSchedule& schedule);

/// Gradient core. For every trajectory k the contribution is
///   pathwise_w[k]        * d(trajectory loss of k through the closed forms)
///   + score_w[k*T + s]   * d(log q_theta(x_{s+1} | x_s) of k)          per s.
/// The Monte-Carlo estimator and the exact enumeration average both reduce to
/// this with different weights.
std::vector<double> estimate_gradient_weighted(const gnn::ModelParams& params,
                                               const ProblemInstance& inst,
                                               std::span<const Trajectory> trajs,
                                               std::span<const double> pathwise_w,
                                               std::span<const double> score_w,
                                               double temperature, const NoiseSchedule& schedule);

/// REINFORCE estimator over one instance's trajectory batch, decomposed per
/// loss term: the score of transition s carries the centered sum of the loss
/// terms sampled after it, each against its own batch-mean baseline. Scores
/// over later transitions would multiply earlier terms with zero mean and
/// only add variance, so they are dropped.
std::vector<double> estimate_gradient(const gnn::ModelParams& params, const ProblemInstance& inst,
                                      std::span<const Trajectory> trajs, double temperature,
                                      const NoiseSchedule& schedule);

/// Linear annealing T_start * max(0, 1 - step / n_anneal).
double temperature(int step, double t_start, int n_anneal);

/// Rescales the gradient iff its global L2 norm exceeds max_norm; returns the
/// pre-clip norm.
double clip_global_norm(std::vector<double>& grad, double max_norm);

/// Rectified Adam. Falls back to an unadapted momentum update while the
/// variance estimate is short-sample (rectification length <= 4).
struct RAdam {
  double lr;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;
  std::vector<double> m, v;

  explicit RAdam(double lr_) : lr(lr_) {}
  void step(std::vector<double>& params, const std::vector<double>& grad);
};

struct StepLog {
  int step;
  double temperature, entropy_term, noise_term, energy_term, total, grad_norm;
};

struct TrainResult {
  gnn::ModelParams params;
  std::vector<StepLog> log;
};

/// Run n_anneal optimizer steps over the given records (instances are sampled
/// with replacement each step). Deterministic given cfg.seed. Per-step JSON
/// log lines are written to log_stream when provided.
TrainResult train(const TrainConfig& cfg, const std::vector<DatasetRecord>& records,
                  std::ostream* log_stream = nullptr);

}  // namespace codiff::train
