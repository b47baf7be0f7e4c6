#include "codiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "codiff/rng.hpp"

namespace codiff {

Adjacency::Adjacency(const Graph& g) {
  offsets.assign(g.num_nodes + 1, 0);
  for (auto [i, j] : g.edges) {
    ++offsets[i + 1];
    ++offsets[j + 1];
  }
  for (int v = 0; v < g.num_nodes; ++v) offsets[v + 1] += offsets[v];
  neighbors.resize(2 * g.edges.size());
  std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
  for (auto [i, j] : g.edges) {
    neighbors[cursor[i]++] = j;
    neighbors[cursor[j]++] = i;
  }
}

void normalize_edges(int num_nodes, std::vector<std::pair<int, int>>& edges) {
  for (auto& [i, j] : edges) {
    if (i == j) throw std::invalid_argument("self loop in edge list");
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= num_nodes) throw std::invalid_argument("edge endpoint out of range");
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

Graph gen_er(int n, double p_edge, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_er: n must be >= 1");
  if (p_edge < 0.0 || p_edge > 1.0) throw std::invalid_argument("gen_er: p_edge outside [0,1]");
  Rng rng(seed);
  Graph g;
  g.num_nodes = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p_edge) g.edges.emplace_back(i, j);
  g.meta = GraphMeta{"er", {{"n", double(n)}, {"p_edge", p_edge}}, seed};
  return g;
}

Graph gen_ba(int n, int m_attach, std::uint64_t seed) {
  if (m_attach < 1 || m_attach >= n) throw std::invalid_argument("gen_ba: need 1 <= m_attach < n");
  Rng rng(seed);
  Graph g;
  g.num_nodes = n;
  // Endpoint multiset; sampling a uniform entry is degree-proportional.
  std::vector<int> endpoints;
  const int m0 = m_attach + 1;
  for (int i = 0; i < m0; ++i)
    for (int j = i + 1; j < m0; ++j) {
      g.edges.emplace_back(i, j);
      endpoints.push_back(i);
      endpoints.push_back(j);
    }
  std::vector<int> picked;
  for (int v = m0; v < n; ++v) {
    picked.clear();
    while (static_cast<int>(picked.size()) < m_attach) {
      const int u = endpoints[rng.uniform_int(endpoints.size())];
      if (std::find(picked.begin(), picked.end(), u) == picked.end()) picked.push_back(u);
    }
    for (int u : picked) {
      g.edges.emplace_back(std::min(u, v), std::max(u, v));
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.meta = GraphMeta{"ba", {{"n", double(n)}, {"m", double(m_attach)}}, seed};
  return g;
}

long rb_inter_edge_budget(int n_cliques, int k_clique, double p, double rho) {
  const double budget =
      (1.0 - p) * n_cliques * std::log(double(n_cliques)) * double(k_clique) * k_clique * rho;
  return std::lround(budget);
}

Graph gen_rb(int n_cliques, int k_clique, double p, std::uint64_t seed, double rho) {
  if (n_cliques < 2 || k_clique < 2)
    throw std::invalid_argument("gen_rb: need n_cliques >= 2 and k_clique >= 2");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("gen_rb: p outside [0,1]");
  Rng rng(seed);
  Graph g;
  const long n = static_cast<long>(n_cliques) * k_clique;
  g.num_nodes = static_cast<int>(n);
  for (int c = 0; c < n_cliques; ++c) {
    const int base = c * k_clique;
    for (int i = 0; i < k_clique; ++i)
      for (int j = i + 1; j < k_clique; ++j) g.edges.emplace_back(base + i, base + j);
  }
  const long cross_pairs = n * (n - 1) / 2 - static_cast<long>(n_cliques) * k_clique * (k_clique - 1) / 2;
  const long want = std::min(rb_inter_edge_budget(n_cliques, k_clique, p, rho), cross_pairs);
  std::unordered_set<long> chosen;
  while (static_cast<long>(chosen.size()) < want) {
    const int i = static_cast<int>(rng.uniform_int(n));
    const int j = static_cast<int>(rng.uniform_int(n));
    if (i == j || i / k_clique == j / k_clique) continue;
    const long a = std::min(i, j), b = std::max(i, j);
    if (chosen.insert(a * n + b).second) g.edges.emplace_back(int(a), int(b));
  }
  std::sort(g.edges.begin(), g.edges.end());
  g.meta = GraphMeta{
      "rb", {{"cliques", double(n_cliques)}, {"ksize", double(k_clique)}, {"p", p}, {"rho", rho}}, seed};
  return g;
}

Graph complement(const Graph& g) {
  Graph out;
  out.num_nodes = g.num_nodes;
  auto it = g.edges.begin();
  for (int i = 0; i < g.num_nodes; ++i)
    for (int j = i + 1; j < g.num_nodes; ++j) {
      if (it != g.edges.end() && *it == std::make_pair(i, j)) {
        ++it;
        continue;
      }
      out.edges.emplace_back(i, j);
    }
  return out;
}

const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::MIS: return "mis";
    case ProblemKind::MDS: return "mds";
    case ProblemKind::MaxCl: return "maxcl";
    case ProblemKind::MaxCut: return "maxcut";
    case ProblemKind::MVC: return "mvc";
  }
  return "?";
}

ProblemKind problem_kind_from_string(const std::string& s) {
  if (s == "mis") return ProblemKind::MIS;
  if (s == "mds") return ProblemKind::MDS;
  if (s == "maxcl") return ProblemKind::MaxCl;
  if (s == "maxcut") return ProblemKind::MaxCut;
  if (s == "mvc") return ProblemKind::MVC;
  throw data_error("unknown problem kind: " + s);
}

void BernoulliField::clamp() {
  for (double& v : p) {
    if (v < kProbEps) v = kProbEps;
    if (v > 1.0 - kProbEps) v = 1.0 - kProbEps;
  }
}

}  // namespace codiff
