#include "codiff/baselines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "codiff/decode.hpp"

namespace codiff::baselines {

std::pair<Assignment, double> brute_force(const EnergyPoly& e) {
  const int n = e.num_vars;
  if (n > kBruteForceCap) throw std::invalid_argument("brute_force: num_vars above cap");
  // Gray-code walk with incremental deltas; near-ties are re-evaluated
  // exactly so drift cannot corrupt the argmin or the tie-break.
  std::vector<double> vals(n, 0.0);
  Assignment x(n, 0);
  double cur = energy_value(e, x);
  Assignment best_x = x;
  double best = cur;
  std::uint64_t best_bits = 0;

  const std::uint64_t total = std::uint64_t{1} << n;
  std::uint64_t bits = 0;
  for (std::uint64_t i = 1; i < total; ++i) {
    const int flip = std::countr_zero(i);  // Gray-code transition
    const VarMarginal m = var_marginal(e, flip, vals.data());
    const double delta = x[flip] ? m.off - m.on : m.on - m.off;
    cur += delta;
    x[flip] ^= 1;
    vals[flip] = x[flip];
    bits ^= std::uint64_t{1} << flip;
    if (cur <= best + 1e-9) {
      const double exact = energy_value(e, x);
      cur = exact;
      if (exact < best || (exact == best && bits < best_bits)) {
        best = exact;
        best_x = x;
        best_bits = bits;
      }
    }
  }
  return {best_x, best};
}

namespace {

Assignment greedy_mis(const Graph& g) {
  Adjacency adj(g);
  std::vector<char> alive(g.num_nodes, 1);
  std::vector<int> deg(g.num_nodes);
  for (int v = 0; v < g.num_nodes; ++v) deg[v] = adj.degree(v);
  Assignment x(g.num_nodes, 0);
  int remaining = g.num_nodes;
  while (remaining > 0) {
    int pick = -1;
    for (int v = 0; v < g.num_nodes; ++v)
      if (alive[v] && (pick < 0 || deg[v] < deg[pick])) pick = v;
    x[pick] = 1;
    auto remove = [&](int v) {
      if (!alive[v]) return;
      alive[v] = 0;
      --remaining;
      for (const int* u = adj.begin(v); u != adj.end(v); ++u)
        if (alive[*u]) --deg[*u];
    };
    remove(pick);
    for (const int* u = adj.begin(pick); u != adj.end(pick); ++u) remove(*u);
  }
  return x;
}

Assignment greedy_mds(const Graph& g) {
  Adjacency adj(g);
  std::vector<char> covered(g.num_nodes, 0);
  Assignment x(g.num_nodes, 0);
  int uncovered = g.num_nodes;
  while (uncovered > 0) {
    int pick = -1, gain_best = -1;
    for (int v = 0; v < g.num_nodes; ++v) {
      if (x[v]) continue;
      int gain = !covered[v];
      for (const int* u = adj.begin(v); u != adj.end(v); ++u) gain += !covered[*u];
      if (gain > gain_best) {
        gain_best = gain;
        pick = v;
      }
    }
    x[pick] = 1;
    auto cover = [&](int v) {
      if (!covered[v]) {
        covered[v] = 1;
        --uncovered;
      }
    };
    cover(pick);
    for (const int* u = adj.begin(pick); u != adj.end(pick); ++u) cover(*u);
  }
  return x;
}

Assignment greedy_mvc(const Graph& g) {
  Adjacency adj(g);
  std::vector<int> deg(g.num_nodes);
  for (int v = 0; v < g.num_nodes; ++v) deg[v] = adj.degree(v);
  std::vector<char> edge_alive(g.edges.size(), 1);
  Assignment x(g.num_nodes, 0);
  int alive_edges = static_cast<int>(g.edges.size());
  while (alive_edges > 0) {
    int pick = -1;
    for (int v = 0; v < g.num_nodes; ++v)
      if (!x[v] && (pick < 0 || deg[v] > deg[pick])) pick = v;
    x[pick] = 1;
    for (std::size_t ei = 0; ei < g.edges.size(); ++ei) {
      if (!edge_alive[ei]) continue;
      const auto [a, b] = g.edges[ei];
      if (a == pick || b == pick) {
        edge_alive[ei] = 0;
        --alive_edges;
        --deg[a];
        --deg[b];
      }
    }
  }
  return x;
}

Assignment greedy_maxcut(const Graph& g) {
  Adjacency adj(g);
  Assignment x(g.num_nodes, 0);
  std::vector<char> placed(g.num_nodes, 0);
  for (int v = 0; v < g.num_nodes; ++v) {
    int same = 0, other = 0;
    for (const int* u = adj.begin(v); u != adj.end(v); ++u) {
      if (!placed[*u]) continue;
      (x[*u] ? other : same) += 1;
    }
    x[v] = same > other;  // join the side that cuts more placed neighbors
    placed[v] = 1;
  }
  return x;
}

}  // namespace

Assignment greedy(ProblemKind kind, const Graph& g) {
  switch (kind) {
    case ProblemKind::MIS: return greedy_mis(g);
    case ProblemKind::MaxCl: return greedy_mis(complement(g));
    case ProblemKind::MDS: return greedy_mds(g);
    case ProblemKind::MVC: return greedy_mvc(g);
    case ProblemKind::MaxCut: return greedy_maxcut(g);
  }
  throw std::invalid_argument("greedy: unknown kind");
}

namespace {

double safe_logistic(double x) {
  if (x > 40.0) return 1.0 - kProbEps;
  if (x < -40.0) return kProbEps;
  const double s = 1.0 / (1.0 + std::exp(-x));
  return std::clamp(s, kProbEps, 1.0 - kProbEps);
}

}  // namespace

Assignment mean_field_anneal(const EnergyPoly& e, int sweeps, const AnnealSchedule& sched,
                             Rng& rng) {
  if (sweeps < 1) throw std::invalid_argument("mean_field_anneal: sweeps must be >= 1");
  const int n = e.num_vars;
  std::vector<double> q(n);
  for (double& v : q) v = 0.5 + 0.01 * (rng.uniform() - 0.5);  // break exact symmetry
  std::vector<double> next(n);
  constexpr double kDamping = 0.5;
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    const double temp = std::max(sched.at(sweep, sweeps), 1e-9);
    for (int i = 0; i < n; ++i) {
      const VarMarginal m = var_marginal(e, i, q.data());
      next[i] = safe_logistic(-(m.on - m.off) / temp);
    }
    for (int i = 0; i < n; ++i) q[i] = (1.0 - kDamping) * q[i] + kDamping * next[i];
  }
  // Round, then one conditional-expectation pass over the corner as repair.
  BernoulliField corner;
  corner.p.resize(n);
  for (int i = 0; i < n; ++i) corner.p[i] = q[i] >= 0.5 ? 1.0 : 0.0;
  return decode::conditional_expectation(corner, e);
}

Assignment simulated_anneal(const EnergyPoly& e, int steps, const AnnealSchedule& sched,
                            Rng& rng) {
  if (steps < 1) throw std::invalid_argument("simulated_anneal: steps must be >= 1");
  const int n = e.num_vars;
  Assignment x(n);
  for (auto& b : x) b = rng.uniform() < 0.5;
  std::vector<double> vals(n);
  for (int i = 0; i < n; ++i) vals[i] = x[i];
  double cur = energy_value(e, x);
  Assignment best_x = x;
  double best = cur;
  for (int step = 0; step < steps; ++step) {
    const double temp = std::max(sched.at(step, steps), 1e-12);
    const int i = static_cast<int>(rng.uniform_int(n));
    const VarMarginal m = var_marginal(e, i, vals.data());
    const double delta = x[i] ? m.off - m.on : m.on - m.off;
    if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
      x[i] ^= 1;
      vals[i] = x[i];
      cur += delta;
      if (cur < best) {
        cur = energy_value(e, x);  // exact refresh against incremental drift
        if (cur < best) {
          best = cur;
          best_x = x;
        }
      }
    }
  }
  return best_x;
}

}  // namespace codiff::baselines
