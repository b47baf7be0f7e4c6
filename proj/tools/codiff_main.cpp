// codiff command-line tool: dataset generation, training, evaluation,
// exact-oracle annotation and report aggregation.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "codiff/baselines.hpp"
#include "codiff/bench.hpp"
#include "codiff/dataset.hpp"
#include "codiff/training.hpp"

using namespace codiff;

namespace {

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct GenArgs {
  std::string kind, out, split = "train", problem = "mis";
  int count = 1;
  std::uint64_t seed = 0;
  int n = 0;
  double p_edge = 0.15;
  int m = 4;
  int cliques = 0, ksize = 0;
  double p = 0.25, rho = kRbInterDensity;
  std::vector<int> cliques_range, ksize_range, nodes_range;
};

Graph generate_one(const GenArgs& a, std::uint64_t seed) {
  if (a.kind == "er") return gen_er(a.n, a.p_edge, seed);
  if (a.kind == "ba") return gen_ba(a.n, a.m, seed);
  // rb, possibly with ranged parameters and node-count rejection sampling
  Rng rng(seed);
  const bool ranged = !a.cliques_range.empty() || !a.ksize_range.empty() || !a.nodes_range.empty();
  if (!ranged) return gen_rb(a.cliques, a.ksize, a.p, seed, a.rho);
  const auto lo_hi = [](const std::vector<int>& r, int fixed) {
    return r.empty() ? std::pair{fixed, fixed} : std::pair{r[0], r[1]};
  };
  const auto [cl_lo, cl_hi] = lo_hi(a.cliques_range, a.cliques);
  const auto [k_lo, k_hi] = lo_hi(a.ksize_range, a.ksize);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int cl = cl_lo + static_cast<int>(rng.uniform_int(cl_hi - cl_lo + 1));
    const int k = k_lo + static_cast<int>(rng.uniform_int(k_hi - k_lo + 1));
    const int nodes = cl * k;
    if (!a.nodes_range.empty() && (nodes < a.nodes_range[0] || nodes > a.nodes_range[1]))
      continue;
    return gen_rb(cl, k, a.p, rng.next(), a.rho);
  }
  throw data_error("gen: node-count resampling failed after 1000 attempts");
}

int cmd_gen(const GenArgs& a, int threads) {
  std::vector<DatasetRecord> records(a.count);
  const Split split = split_from_string(a.split);
  const ProblemKind kind = problem_kind_from_string(a.problem);
  auto worker = [&](int begin, int end) {
    for (int i = begin; i < end; ++i) {
      records[i].graph = generate_one(a, a.seed + std::uint64_t(i));
      records[i].problem_kind = kind;
      records[i].split = split;
    }
  };
  if (threads <= 1 || a.count < 4) {
    worker(0, a.count);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (a.count + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int b = std::min(a.count, t * chunk), e = std::min(a.count, b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& th : pool) th.join();
  }
  write_dataset(records, a.out);
  std::cerr << "wrote " << records.size() << " records to " << a.out << "\n";
  return 0;
}

int cmd_train(const std::string& preset_name, const std::string& config_path,
              const std::string& data_path, const std::string& split, std::uint64_t seed,
              bool seed_set, const std::string& out, const std::string& log_path, int threads) {
  train::TrainConfig cfg =
      config_path.empty() ? train::preset(preset_name) : train::config_from_json_file(config_path);
  if (seed_set) cfg.seed = seed;
  cfg.threads = threads;
  auto records = read_dataset(data_path);
  if (split != "all") {
    records = filter_split(records, split_from_string(split));
    if (records.empty()) throw data_error("train: no records in split \"" + split + "\"");
  }
  std::ofstream log(log_path);
  if (!log) throw data_error("cannot open log for writing: " + log_path);
  const auto result = train::train(cfg, records, &log);
  gnn::Checkpoint ckpt{result.params, cfg.noise, cfg.problem, cfg.penalty_a, cfg.penalty_b};
  gnn::save_checkpoint(ckpt, out);
  std::cerr << "trained " << cfg.n_anneal << " steps; checkpoint " << out << ", log " << log_path
            << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, const std::string& split,
             int samples, int repeat, const std::string& decode_str,
             const std::vector<std::string>& baseline_names, std::vector<std::uint64_t> seeds,
             const std::string& out_prefix, const std::string& solutions_path, int threads,
             int sa_steps, int mfa_sweeps) {
  const gnn::Checkpoint ckpt = gnn::load_checkpoint(ckpt_path);
  auto records = read_dataset(data_path);
  if (split != "all") records = filter_split(records, split_from_string(split));
  if (records.empty()) throw data_error("eval: no records selected");
  decode::decode_mode_from_string(decode_str);  // validate before the long run
  std::vector<std::string> methods{"model-" + decode_str};
  for (const auto& b : baseline_names) methods.push_back(b);
  bench::ExperimentConfig cfg;
  cfg.n_samples = samples;
  cfg.n_repeat = repeat;
  if (!seeds.empty()) cfg.seeds = std::move(seeds);
  cfg.threads = threads;
  cfg.sa_steps = sa_steps;
  cfg.mfa_sweeps = mfa_sweeps;
  const auto result = bench::run_experiment(&ckpt, records, methods, cfg);
  bench::write_rows_csv(result.rows, out_prefix + ".csv");
  bench::write_summary_json(bench::summarize(result.rows), out_prefix + ".json");
  if (!solutions_path.empty()) bench::write_solutions_jsonl(result.solutions, solutions_path);
  std::cerr << "evaluated " << records.size() << " instances; report " << out_prefix
            << ".{csv,json}\n";
  return 0;
}

int cmd_oracle(const std::string& data_path, int cap) {
  auto records = read_dataset(data_path);
  int annotated = 0, skipped = 0;
  for (auto& rec : records) {
    if (rec.graph.num_nodes > cap) {
      std::cerr << "warning: skipping " << rec.graph.num_nodes << "-node record (cap " << cap
                << ")\n";
      ++skipped;
      continue;
    }
    const EnergyPoly e = build_energy(rec.problem_kind, rec.graph);
    rec.oracle_energy = baselines::brute_force(e).second;
    ++annotated;
  }
  write_dataset(records, data_path);
  std::cerr << "annotated " << annotated << " records, skipped " << skipped << "\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& csvs, const std::string& out,
               const std::string& merged_csv, const std::string& plot_data) {
  std::vector<bench::EvalRow> rows;
  for (const auto& path : csvs) {
    const auto part = bench::read_rows_csv(path);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  bench::write_summary_json(bench::summarize(rows), out);
  if (!merged_csv.empty()) bench::write_rows_csv(rows, merged_csv);
  if (!plot_data.empty()) bench::write_plot_data(rows, plot_data);
  std::cerr << "summarized " << rows.size() << " rows into " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codiff: discrete-diffusion sampler for combinatorial optimization", "codiff"};
  app.require_subcommand(1);

  // gen
  GenArgs ga;
  int gen_threads = default_threads();
  auto* gen = app.add_subcommand("gen", "generate a dataset of random instances");
  gen->add_option("--kind", ga.kind, "generator: er, ba or rb")
      ->required()
      ->check(CLI::IsMember({"er", "ba", "rb"}));
  gen->add_option("--count", ga.count, "number of instances")->check(CLI::PositiveNumber);
  gen->add_option("--seed", ga.seed, "base seed; record i uses seed+i");
  gen->add_option("--out", ga.out, "output JSON-lines path")->required();
  gen->add_option("--split", ga.split, "split tag: train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  gen->add_option("--problem", ga.problem, "problem kind tag")
      ->check(CLI::IsMember({"mis", "mds", "maxcl", "maxcut", "mvc"}));
  gen->add_option("--n", ga.n, "node count (er, ba)");
  gen->add_option("--p-edge", ga.p_edge, "edge probability (er)");
  gen->add_option("--m", ga.m, "attachment count (ba)");
  gen->add_option("--cliques", ga.cliques, "number of cliques (rb)");
  gen->add_option("--ksize", ga.ksize, "clique size (rb)");
  gen->add_option("--p", ga.p, "inter-clique sparsity in [0,1], 1 = disconnected (rb)");
  gen->add_option("--rho", ga.rho, "inter-clique edge density factor (rb)");
  gen->add_option("--cliques-range", ga.cliques_range, "min max clique count (rb)")->expected(2);
  gen->add_option("--ksize-range", ga.ksize_range, "min max clique size (rb)")->expected(2);
  gen->add_option("--nodes-range", ga.nodes_range, "min max node count, rejection-sampled (rb)")
      ->expected(2);
  gen->add_option("--threads", gen_threads, "worker threads");

  // train
  std::string tr_preset, tr_config, tr_data, tr_split = "all", tr_out = "model.json",
                                             tr_log = "train_log.jsonl";
  std::uint64_t tr_seed = 0;
  int tr_threads = 1;
  auto* tr = app.add_subcommand("train", "train a sampler on a dataset");
  auto* preset_opt =
      tr->add_option("--preset", tr_preset, "named hyperparameter preset (see --list-presets)");
  tr->add_option("--config", tr_config, "flat JSON config file")->excludes(preset_opt);
  tr->add_option("--data", tr_data, "training dataset (JSON-lines)")->required();
  tr->add_option("--split", tr_split, "restrict to a split: train, val, test or all");
  auto* seed_opt = tr->add_option("--seed", tr_seed, "training seed (overrides config)");
  tr->add_option("--out", tr_out, "checkpoint output path");
  tr->add_option("--log", tr_log, "JSON-lines training log path");
  tr->add_option("--threads", tr_threads, "worker threads (default 1)");
  bool list_presets = false;
  tr->add_flag("--list-presets", list_presets, "print preset names and exit");

  // eval
  std::string ev_ckpt, ev_data, ev_split = "all", ev_decode = "ce", ev_out = "eval", ev_solutions;
  int ev_samples = 8, ev_repeat = 3, ev_threads = default_threads(), ev_sa_steps = 50000,
      ev_mfa_sweeps = 300;
  std::vector<std::string> ev_baselines;
  std::vector<std::uint64_t> ev_seeds;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->add_option("--ckpt", ev_ckpt, "model checkpoint")->required();
  ev->add_option("--data", ev_data, "dataset (JSON-lines)")->required();
  ev->add_option("--split", ev_split, "restrict to a split: train, val, test or all");
  ev->add_option("--samples", ev_samples, "solutions drawn per instance");
  ev->add_option("--repeat", ev_repeat, "diffusion-step repetition factor at decode time");
  ev->add_option("--decode", ev_decode, "decode mode: raw, ce or ce-st:<k>");
  ev->add_option("--baselines", ev_baselines, "also run: greedy, mfa, sa")->delimiter(',');
  ev->add_option("--seeds", ev_seeds, "evaluation seeds (repeat for multiple)");
  ev->add_option("--out", ev_out, "report path prefix (.csv and .json)");
  ev->add_option("--solutions", ev_solutions, "optional per-sample JSON-lines dump");
  ev->add_option("--threads", ev_threads, "worker threads");
  ev->add_option("--sa-steps", ev_sa_steps, "simulated-annealing steps per sample");
  ev->add_option("--mfa-sweeps", ev_mfa_sweeps, "mean-field-annealing sweeps per sample");

  // oracle
  std::string or_data;
  int or_cap = baselines::kBruteForceCap;
  auto* orc = app.add_subcommand("oracle", "annotate records with exact brute-force energies");
  orc->add_option("--data", or_data, "dataset to annotate in place")->required();
  orc->add_option("--cap", or_cap, "node-count cap for enumeration")
      ->check(CLI::Range(1, baselines::kBruteForceCap));

  // report
  std::vector<std::string> rp_csvs;
  std::string rp_out = "summary.json", rp_csv, rp_plot;
  auto* rp = app.add_subcommand("report", "merge evaluation CSVs into a summary");
  rp->add_option("csvs", rp_csvs, "input CSV files")->required();
  rp->add_option("--out", rp_out, "summary JSON path");
  rp->add_option("--csv", rp_csv, "optional merged CSV path");
  rp->add_option("--plot-data", rp_plot, "optional plot-data JSON path");

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen(ga, gen_threads);
    if (tr->parsed()) {
      if (list_presets) {
        for (const auto& name : train::preset_names()) std::cout << name << "\n";
        return 0;
      }
      if (tr_preset.empty() && tr_config.empty()) throw CLI::RequiredError("--preset or --config");
      return cmd_train(tr_preset, tr_config, tr_data, tr_split, tr_seed, seed_opt->count() > 0,
                       tr_out, tr_log, tr_threads);
    }
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_data, ev_split, ev_samples, ev_repeat, ev_decode, ev_baselines,
                      ev_seeds, ev_out, ev_solutions, ev_threads, ev_sa_steps, ev_mfa_sweeps);
    if (orc->parsed()) return cmd_oracle(or_data, or_cap);
    if (rp->parsed()) return cmd_report(rp_csvs, rp_out, rp_csv, rp_plot);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
