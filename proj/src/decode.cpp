#include "codiff/decode.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include "codiff/diffusion.hpp"

namespace codiff::decode {

DecodeMode decode_mode_from_string(const std::string& s) {
  if (s == "raw") return {DecodeMode::Raw, 0};
  if (s == "ce") return {DecodeMode::CE, 0};
  if (s.rfind("ce-st:", 0) == 0) {
    const int k = std::stoi(s.substr(6));
    if (k < 1 || k > 16) throw data_error("ce-st token size out of range [1,16]: " + s);
    return {DecodeMode::CeSt, k};
  }
  throw data_error("unknown decode mode: " + s);
}

std::string to_string(const DecodeMode& m) {
  switch (m.kind) {
    case DecodeMode::Raw: return "raw";
    case DecodeMode::CE: return "ce";
    case DecodeMode::CeSt: return "ce-st:" + std::to_string(m.token);
  }
  return "?";
}

int eval_condition_index(int t, int n_repeat, int t_train) {
  const int idx = (t + n_repeat - 1) / n_repeat;
  return std::clamp(idx, 1, t_train);
}

std::vector<ReverseSample> reverse_sample(const gnn::ModelParams& params,
                                          const ProblemInstance& inst, int n_repeat,
                                          int n_samples, Rng& rng) {
  if (n_repeat < 1) throw std::invalid_argument("reverse_sample: n_repeat must be >= 1");
  const int t_train = params.cfg.t_steps;
  const int n = inst.num_nodes();
  std::vector<ReverseSample> out;
  out.reserve(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    Rng stream = rng.fork(0xe7a1ull, s);
    std::vector<double> rand_feats;
    if (params.cfg.random_feats) {
      rand_feats.resize(std::size_t(n) * gnn::kNumRandomFeats);
      for (double& f : rand_feats) f = stream.uniform();
    }
    Assignment x = sample_stationary(n, stream);
    BernoulliField field;
    for (int t = n_repeat * t_train; t >= 1; --t) {
      gnn::StepInput in{&inst.adj, &x, eval_condition_index(t, n_repeat, t_train),
                        rand_feats.empty() ? nullptr : rand_feats.data()};
      field = gnn::forward(params, in);
      x = mf_sample(field, stream);
    }
    out.push_back({std::move(x), std::move(field)});
  }
  return out;
}

namespace {

std::vector<int> sorted_order(const BernoulliField& q) {
  std::vector<int> order(q.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return q.p[a] > q.p[b]; });
  return order;
}

Assignment values_to_bits(const std::vector<double>& cur) {
  Assignment bits(cur.size());
  for (std::size_t i = 0; i < cur.size(); ++i) bits[i] = cur[i] != 0.0;
  return bits;
}

}  // namespace

Assignment conditional_expectation(const BernoulliField& q, const EnergyPoly& e) {
  if (q.size() != e.num_vars)
    throw std::invalid_argument("conditional_expectation: length mismatch");
  std::vector<double> cur = q.p;
  for (int i : sorted_order(q)) {
    const VarMarginal m = var_marginal(e, i, cur.data());
    // Pinning to 1 contributes m.on, to 0 contributes m.off; ties keep the
    // likelier value under the field.
    double v;
    if (m.on < m.off)
      v = 1.0;
    else if (m.on > m.off)
      v = 0.0;
    else
      v = q.p[i] >= 0.5 ? 1.0 : 0.0;
    cur[i] = v;
  }
  return values_to_bits(cur);
}

Assignment ce_st(const BernoulliField& q, const EnergyPoly& e, int k) {
  if (k < 1 || k > 16) throw std::invalid_argument("ce_st: token size out of range [1,16]");
  if (q.size() != e.num_vars) throw std::invalid_argument("ce_st: length mismatch");
  const std::vector<int> order = sorted_order(q);
  std::vector<double> cur = q.p;
  std::vector<int> pos_in_block(e.num_vars, -1);
  std::vector<int> touched_terms, touched_comps;
  std::vector<int> term_stamp(e.terms.size(), -1), comp_stamp(e.comp_products.size(), -1);
  struct Inter {
    double outer;
    std::uint32_t mask;
    bool complemented;
  };
  std::vector<Inter> inter;

  for (int start = 0, block_id = 0; start < e.num_vars; start += k, ++block_id) {
    const int kb = std::min(k, e.num_vars - start);
    const std::uint32_t configs = 1u << kb;
    for (int b = 0; b < kb; ++b) pos_in_block[order[start + b]] = b;

    // lin1/lin0: contribution of single-block-variable terms at bit 1 / 0.
    double lin1[16] = {0}, lin0[16] = {0};
    inter.clear();
    auto walk = [&](const std::vector<EnergyTerm>& terms, const std::vector<int>& offs,
                    const std::vector<int>& index, std::vector<int>& stamp, bool complemented) {
      for (int b = 0; b < kb; ++b) {
        const int node = order[start + b];
        for (int kk = offs[node]; kk < offs[node + 1]; ++kk) {
          const int tid = index[kk];
          if (stamp[tid] == block_id) continue;
          stamp[tid] = block_id;
          const EnergyTerm& t = terms[tid];
          double outer = t.coeff;
          std::uint32_t mask = 0;
          for (int v : t.vars) {
            if (pos_in_block[v] >= 0)
              mask |= 1u << pos_in_block[v];
            else
              outer *= complemented ? 1.0 - cur[v] : cur[v];
          }
          if (std::popcount(mask) == 1) {
            const int p = std::countr_zero(mask);
            (complemented ? lin0[p] : lin1[p]) += outer;
          } else {
            inter.push_back({outer, mask, complemented});
          }
        }
      }
    };
    walk(e.terms, e.term_index_offsets, e.term_index, term_stamp, false);
    walk(e.comp_products, e.comp_index_offsets, e.comp_index, comp_stamp, true);

    std::uint32_t pref = 0;
    for (int b = 0; b < kb; ++b)
      if (q.p[order[start + b]] >= 0.5) pref |= 1u << b;

    std::uint32_t best_cfg = 0;
    double best_score = 0.0;
    int best_agree = -1;
    for (std::uint32_t cfg = 0; cfg < configs; ++cfg) {
      double score = 0.0;
      for (int b = 0; b < kb; ++b) score += (cfg >> b & 1) ? lin1[b] : lin0[b];
      for (const Inter& it : inter) {
        const std::uint32_t setbits = it.complemented ? (~cfg & it.mask) : (cfg & it.mask);
        if (setbits == it.mask) score += it.outer;
      }
      const int agree = std::popcount(~(cfg ^ pref) & (configs - 1));
      if (best_agree < 0 || score < best_score ||
          (score == best_score && agree > best_agree)) {
        best_score = score;
        best_cfg = cfg;
        best_agree = agree;
      }
    }
    for (int b = 0; b < kb; ++b) {
      cur[order[start + b]] = (best_cfg >> b) & 1 ? 1.0 : 0.0;
      pos_in_block[order[start + b]] = -1;
    }
  }
  return values_to_bits(cur);
}

SolveStats solve(const gnn::ModelParams& params, const ProblemInstance& inst, int n_samples,
                 int n_repeat, const DecodeMode& mode, Rng& rng) {
  SolveStats stats;
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = reverse_sample(params, inst, n_repeat, n_samples, rng);
  std::vector<Assignment> decoded;
  decoded.reserve(samples.size());
  for (const auto& s : samples) {
    switch (mode.kind) {
      case DecodeMode::Raw: decoded.push_back(s.x0); break;
      case DecodeMode::CE: decoded.push_back(conditional_expectation(s.final_field, inst.energy)); break;
      case DecodeMode::CeSt: decoded.push_back(ce_st(s.final_field, inst.energy, mode.token)); break;
    }
  }
  const auto t1 = std::chrono::steady_clock::now();
  stats.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  int best = -1;
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    const double energy = energy_value(inst.energy, decoded[i]);
    stats.energies.push_back(energy);
    stats.sizes.push_back(objective_size(inst.kind, inst.graph, decoded[i]));
    stats.feasible.push_back(is_feasible(inst.kind, inst.graph, decoded[i]));
    if (best < 0 || energy < stats.best_energy) {
      best = static_cast<int>(i);
      stats.best_energy = energy;
    }
  }
  stats.best = decoded[best];
  return stats;
}

}  // namespace codiff::decode
