#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "codiff/dataset.hpp"
#include "codiff/decode.hpp"
#include "codiff/gnn.hpp"

namespace codiff::bench {

/// |E_opt - E_model| / |E_opt|; throws on a zero optimum.
double relative_error(double e_opt, double e_model);

/// E_best / E_opt. Equals 1 at optimality; orientation depends on the sign of
/// the underlying objective and is reported as-is.
double ar_star(double e_opt, double e_best);

struct EvalRow {
  std::string instance_id;
  std::string method;
  std::uint64_t seed = 0;
  int n = 0;
  int t_steps = 0;    // model diffusion steps (0 for baselines)
  int n_repeat = 1;
  double mean_energy = 0.0, best_energy = 0.0;
  double mean_size = 0.0, best_size = 0.0;
  double feasibility_rate = 0.0;
  double wall_ms = 0.0;
  std::optional<double> oracle_energy, rel_err_mean, rel_err_best, ar;
};

struct ExperimentConfig {
  int n_samples = 8;
  int n_repeat = 1;
  std::vector<std::uint64_t> seeds = {0};
  int threads = 1;
  int sa_steps = 50000;
  int mfa_sweeps = 300;
  double anneal_t_start = 2.0;
};

/// One decoded sample, for the solution dump.
struct SolutionEntry {
  std::string instance_id;
  std::string mode;
  std::uint64_t seed = 0;
  int sample_idx = 0;
  double energy = 0.0, size = 0.0;
  bool feasible = false;
  double wall_ms = 0.0;  // of the whole per-instance solve
};

struct ExperimentResult {
  std::vector<EvalRow> rows;
  std::vector<SolutionEntry> solutions;
};

/// Methods: "model-raw", "model-ce", "model-ce-st:<k>" (require a checkpoint),
/// and "greedy", "mfa", "sa". Per-instance relative metrics appear only where
/// the record carries an oracle energy; rows without one are still produced.
ExperimentResult run_experiment(const gnn::Checkpoint* model,
                                const std::vector<DatasetRecord>& records,
                                const std::vector<std::string>& methods,
                                const ExperimentConfig& cfg);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // across seed means
  std::vector<double> per_seed;
};

/// method -> metric -> summary. Per-seed instance means first, then mean and
/// standard deviation across seeds.
using Summary = std::map<std::string, std::map<std::string, MetricSummary>>;

Summary summarize(const std::vector<EvalRow>& rows);

void write_rows_csv(const std::vector<EvalRow>& rows, const std::string& path);
std::vector<EvalRow> read_rows_csv(const std::string& path);
void write_summary_json(const Summary& summary, const std::string& path);

/// Plot-data series: per method, x = t_steps * n_repeat, y = mean relative
/// error across seeds (with stddev).
void write_plot_data(const std::vector<EvalRow>& rows, const std::string& path);

/// Per-sample solution dump, one JSON object per line:
/// {instance_id, mode, sample_idx, energy, size, feasible, wall_ms}.
void write_solutions_jsonl(const std::vector<SolutionEntry>& solutions, const std::string& path);

}  // namespace codiff::bench
