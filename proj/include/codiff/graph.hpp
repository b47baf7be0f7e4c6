#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "codiff/types.hpp"

namespace codiff {

/// Generator provenance attached to generated graphs.
struct GraphMeta {
  std::string generator;                                     // "er", "ba", "rb"
  std::vector<std::pair<std::string, double>> params;        // name -> value
  std::uint64_t seed = 0;
};

/// Sparse undirected graph. Edges are (i, j) with i < j, lexicographically
/// sorted and duplicate-free; no self loops.
struct Graph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::optional<GraphMeta> meta;

  int num_edges() const { return static_cast<int>(edges.size()); }
  bool operator==(const Graph& o) const {
    return num_nodes == o.num_nodes && edges == o.edges;
  }
};

/// CSR neighbor lists, built once per graph where adjacency walks are needed.
struct Adjacency {
  std::vector<int> offsets;    // size num_nodes + 1
  std::vector<int> neighbors;  // both directions

  explicit Adjacency(const Graph& g);
  int degree(int v) const { return offsets[v + 1] - offsets[v]; }
  const int* begin(int v) const { return neighbors.data() + offsets[v]; }
  const int* end(int v) const { return neighbors.data() + offsets[v + 1]; }
};

/// Normalize an edge list in place (orient, sort, dedupe) and validate bounds.
void normalize_edges(int num_nodes, std::vector<std::pair<int, int>>& edges);

/// Erdős–Rényi G(n, p): every pair independently with probability p_edge.
Graph gen_er(int n, double p_edge, std::uint64_t seed);

/// Barabási–Albert preferential attachment starting from a clique of
/// m_attach+1 nodes; every later node attaches to m_attach distinct nodes.
Graph gen_ba(int n, int m_attach, std::uint64_t seed);

inline constexpr double kRbInterDensity = 0.3;

/// RB-style instance: n_cliques disjoint cliques of size k_clique plus
/// round((1-p) * n_cliques * ln(n_cliques) * k_clique^2 * rho) distinct
/// inter-clique edges drawn uniformly. p = 1 leaves the cliques disconnected.
Graph gen_rb(int n_cliques, int k_clique, double p, std::uint64_t seed,
             double rho = kRbInterDensity);

/// Number of inter-clique edges gen_rb will draw (before capping at the number
/// of available cross pairs).
long rb_inter_edge_budget(int n_cliques, int k_clique, double p, double rho = kRbInterDensity);

Graph complement(const Graph& g);

}  // namespace codiff
