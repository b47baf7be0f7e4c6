#include "codiff/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "codiff/baselines.hpp"

namespace codiff::bench {

double relative_error(double e_opt, double e_model) {
  if (e_opt == 0.0) throw std::invalid_argument("relative_error: zero optimum");
  return std::abs(e_opt - e_model) / std::abs(e_opt);
}

double ar_star(double e_opt, double e_best) {
  if (e_opt == 0.0) throw std::invalid_argument("ar_star: zero optimum");
  return e_best / e_opt;
}

namespace {

struct SamplePack {
  std::vector<double> energies, sizes;
  std::vector<char> feasible;
  double wall_ms = 0.0;
};

SamplePack run_method(const std::string& method, const gnn::Checkpoint* model,
                      const ProblemInstance& inst, const ExperimentConfig& cfg,
                      std::uint64_t seed, std::size_t instance_index) {
  SamplePack pack;
  Rng rng = Rng(seed).fork(0x5eedull, instance_index);
  if (method.rfind("model-", 0) == 0) {
    if (!model) throw std::invalid_argument("run_experiment: method needs a checkpoint: " + method);
    const decode::DecodeMode mode = decode::decode_mode_from_string(method.substr(6));
    const auto stats =
        decode::solve(model->params, inst, cfg.n_samples, cfg.n_repeat, mode, rng);
    pack.energies = stats.energies;
    pack.sizes = stats.sizes;
    pack.feasible = stats.feasible;
    pack.wall_ms = stats.wall_ms;
    return pack;
  }
  auto push = [&](const Assignment& x) {
    pack.energies.push_back(energy_value(inst.energy, x));
    pack.sizes.push_back(objective_size(inst.kind, inst.graph, x));
    pack.feasible.push_back(is_feasible(inst.kind, inst.graph, x));
  };
  const auto t0 = std::chrono::steady_clock::now();
  if (method == "greedy") {
    push(baselines::greedy(inst.kind, inst.graph));
  } else if (method == "mfa") {
    for (int s = 0; s < cfg.n_samples; ++s) {
      Rng r = rng.fork(1, s);
      push(baselines::mean_field_anneal(inst.energy, cfg.mfa_sweeps, {cfg.anneal_t_start, 0.0}, r));
    }
  } else if (method == "sa") {
    for (int s = 0; s < cfg.n_samples; ++s) {
      Rng r = rng.fork(2, s);
      push(baselines::simulated_anneal(inst.energy, cfg.sa_steps, {cfg.anneal_t_start, 0.0}, r));
    }
  } else {
    throw std::invalid_argument("run_experiment: unknown method: " + method);
  }
  pack.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return pack;
}

}  // namespace

ExperimentResult run_experiment(const gnn::Checkpoint* model,
                                const std::vector<DatasetRecord>& records,
                                const std::vector<std::string>& methods,
                                const ExperimentConfig& cfg) {
  ExperimentResult result;
  if (records.empty() || methods.empty()) return result;

  std::vector<ProblemInstance> instances;
  instances.reserve(records.size());
  for (const auto& r : records) {
    const ProblemKind kind = model ? model->problem : r.problem_kind;
    const double a = model ? model->penalty_a : 1.0;
    const double b = model ? model->penalty_b : 1.01;
    instances.emplace_back(r.graph, kind, a, b);
  }

  struct Job {
    std::size_t inst;
    std::size_t method;
    std::size_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
    for (std::size_t m = 0; m < methods.size(); ++m)
      for (std::size_t i = 0; i < records.size(); ++i) jobs.push_back({i, m, s});

  std::vector<SamplePack> packs(jobs.size());
  const int threads = std::max(1, cfg.threads);
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j)
      packs[j] = run_method(methods[jobs[j].method], model, instances[jobs[j].inst], cfg,
                            cfg.seeds[jobs[j].seed], jobs[j].inst);
  };
  if (threads == 1) {
    worker(0, jobs.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (jobs.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t b = std::min(jobs.size(), t * chunk);
      const std::size_t e = std::min(jobs.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    const auto& pack = packs[j];
    const auto& rec = records[job.inst];
    EvalRow row;
    row.instance_id = "i" + std::to_string(job.inst);
    row.method = methods[job.method];
    row.seed = cfg.seeds[job.seed];
    row.n = rec.graph.num_nodes;
    row.t_steps = model ? model->params.cfg.t_steps : 0;
    row.n_repeat = cfg.n_repeat;
    const std::size_t k = pack.energies.size();
    row.best_energy = *std::min_element(pack.energies.begin(), pack.energies.end());
    for (std::size_t i = 0; i < k; ++i) {
      row.mean_energy += pack.energies[i] / double(k);
      row.mean_size += pack.sizes[i] / double(k);
      row.feasibility_rate += pack.feasible[i] / double(k);
    }
    double best_size = pack.sizes[0];
    for (std::size_t i = 0; i < k; ++i)
      if (pack.energies[i] == row.best_energy) best_size = pack.sizes[i];
    row.best_size = best_size;
    row.wall_ms = pack.wall_ms;
    if (rec.oracle_energy && *rec.oracle_energy != 0.0) {
      row.oracle_energy = rec.oracle_energy;
      row.rel_err_mean = relative_error(*rec.oracle_energy, row.mean_energy);
      row.rel_err_best = relative_error(*rec.oracle_energy, row.best_energy);
      row.ar = ar_star(*rec.oracle_energy, row.best_energy);
    }
    result.rows.push_back(row);
    for (std::size_t i = 0; i < k; ++i)
      result.solutions.push_back({row.instance_id, row.method, row.seed, static_cast<int>(i),
                                  pack.energies[i], pack.sizes[i],
                                  static_cast<bool>(pack.feasible[i]), pack.wall_ms});
  }
  return result;
}

namespace {

constexpr const char* kCsvHeader =
    "instance_id,method,seed,n,t_steps,n_repeat,mean_energy,best_energy,mean_size,best_size,"
    "feasibility_rate,wall_ms,oracle_energy,rel_err_mean,rel_err_best,ar_star";

std::string opt_str(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(17);
  os << *v;
  return os.str();
}

}  // namespace

void write_rows_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << kCsvHeader << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.instance_id << ',' << r.method << ',' << r.seed << ',' << r.n << ',' << r.t_steps
        << ',' << r.n_repeat << ',' << r.mean_energy << ',' << r.best_energy << ','
        << r.mean_size << ',' << r.best_size << ',' << r.feasibility_rate << ',' << r.wall_ms
        << ',' << opt_str(r.oracle_energy) << ',' << opt_str(r.rel_err_mean) << ','
        << opt_str(r.rel_err_best) << ',' << opt_str(r.ar) << '\n';
  }
}

std::vector<EvalRow> read_rows_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw data_error(path + ": unexpected CSV header");
  std::vector<EvalRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) f.push_back(cell);
    while (f.size() < 16) f.push_back("");
    try {
      EvalRow r;
      r.instance_id = f[0];
      r.method = f[1];
      r.seed = std::stoull(f[2]);
      r.n = std::stoi(f[3]);
      r.t_steps = std::stoi(f[4]);
      r.n_repeat = std::stoi(f[5]);
      r.mean_energy = std::stod(f[6]);
      r.best_energy = std::stod(f[7]);
      r.mean_size = std::stod(f[8]);
      r.best_size = std::stod(f[9]);
      r.feasibility_rate = std::stod(f[10]);
      r.wall_ms = std::stod(f[11]);
      auto opt = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) return std::nullopt;
        return std::stod(s);
      };
      r.oracle_energy = opt(f[12]);
      r.rel_err_mean = opt(f[13]);
      r.rel_err_best = opt(f[14]);
      r.ar = opt(f[15]);
      rows.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": bad CSV row: " + e.what());
    }
  }
  return rows;
}

Summary summarize(const std::vector<EvalRow>& rows) {
  // method -> metric -> seed -> (sum, count)
  std::map<std::string, std::map<std::string, std::map<std::uint64_t, std::pair<double, int>>>>
      acc;
  auto add = [&](const EvalRow& r, const std::string& metric, std::optional<double> v) {
    if (!v) return;
    auto& cell = acc[r.method][metric][r.seed];
    cell.first += *v;
    cell.second += 1;
  };
  for (const auto& r : rows) {
    add(r, "mean_energy", r.mean_energy);
    add(r, "best_energy", r.best_energy);
    add(r, "mean_size", r.mean_size);
    add(r, "best_size", r.best_size);
    add(r, "feasibility_rate", r.feasibility_rate);
    add(r, "wall_ms", r.wall_ms);
    add(r, "rel_err_mean", r.rel_err_mean);
    add(r, "rel_err_best", r.rel_err_best);
    add(r, "ar_star", r.ar);
  }
  Summary out;
  for (const auto& [method, metrics] : acc)
    for (const auto& [metric, seeds] : metrics) {
      MetricSummary ms;
      for (const auto& [seed, cell] : seeds) ms.per_seed.push_back(cell.first / cell.second);
      for (double v : ms.per_seed) ms.mean += v / double(ms.per_seed.size());
      if (ms.per_seed.size() > 1) {
        double var = 0.0;
        for (double v : ms.per_seed) var += (v - ms.mean) * (v - ms.mean);
        ms.stddev = std::sqrt(var / double(ms.per_seed.size() - 1));
      }
      out[method][metric] = std::move(ms);
    }
  return out;
}

void write_summary_json(const Summary& summary, const std::string& path) {
  nlohmann::ordered_json j;
  for (const auto& [method, metrics] : summary) {
    nlohmann::ordered_json jm;
    for (const auto& [metric, ms] : metrics)
      jm[metric] = {{"mean", ms.mean}, {"std", ms.stddev}, {"per_seed", ms.per_seed}};
    j[method] = std::move(jm);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
}

void write_plot_data(const std::vector<EvalRow>& rows, const std::string& path) {
  // x = evaluation diffusion steps, y = relative error, grouped by method.
  std::map<std::string, std::map<int, std::vector<double>>> series;
  for (const auto& r : rows)
    if (r.rel_err_mean) series[r.method][r.t_steps * r.n_repeat].push_back(*r.rel_err_mean);
  nlohmann::ordered_json j;
  j["series"] = nlohmann::ordered_json::array();
  for (const auto& [method, points] : series) {
    nlohmann::ordered_json s;
    s["method"] = method;
    std::vector<int> xs;
    std::vector<double> ys, errs;
    for (const auto& [x, vals] : points) {
      double mean = 0.0;
      for (double v : vals) mean += v / double(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      xs.push_back(x);
      ys.push_back(mean);
      errs.push_back(vals.size() > 1 ? std::sqrt(var / double(vals.size() - 1)) : 0.0);
    }
    s["x"] = xs;
    s["y"] = ys;
    s["yerr"] = errs;
    j["series"].push_back(std::move(s));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
}

void write_solutions_jsonl(const std::vector<SolutionEntry>& solutions, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open for writing: " + path);
  for (const auto& s : solutions) {
    nlohmann::ordered_json j;
    j["instance_id"] = s.instance_id;
    j["mode"] = s.mode;
    j["seed"] = s.seed;
    j["sample_idx"] = s.sample_idx;
    j["energy"] = s.energy;
    j["size"] = s.size;
    j["feasible"] = s.feasible;
    j["wall_ms"] = s.wall_ms;
    out << j.dump() << '\n';
  }
}

}  // namespace codiff::bench
