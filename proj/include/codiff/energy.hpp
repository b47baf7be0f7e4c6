#pragma once

#include <vector>

#include "codiff/graph.hpp"
#include "codiff/types.hpp"

namespace codiff {

/// One multilinear monomial: coeff * prod_{i in vars} x_i. An empty vars set
/// is a constant. In complement form the factors are (1 - x_i) instead, which
/// keeps minimum-dominating-set energies of high-degree nodes compact.
struct EnergyTerm {
  double coeff = 0.0;
  std::vector<int> vars;  // strictly increasing
};

/// Multilinear binary energy H(x). Immutable after construction; all
/// evaluation paths are pure and shareable across threads.
struct EnergyPoly {
  int num_vars = 0;
  ProblemKind kind = ProblemKind::MIS;
  double penalty_a = 1.0, penalty_b = 1.01;
  std::vector<EnergyTerm> terms;          // prod x_i form, canonically sorted
  std::vector<EnergyTerm> comp_products;  // prod (1 - x_i) form

  // var -> indices into terms / comp_products, built at construction.
  std::vector<int> term_index_offsets, term_index;
  std::vector<int> comp_index_offsets, comp_index;

  std::size_t total_terms() const { return terms.size() + comp_products.size(); }
};

/// Nodes of degree above this are never expanded symbolically for MDS.
inline constexpr int kMdsExpandDegreeCap = 25;
/// And regardless of degree, expansion stops once the polynomial holds this
/// many terms; remaining nodes stay in complement-product form (same value).
inline constexpr std::size_t kMdsTermBudget = std::size_t{1} << 20;

/// Build the energy polynomial for a problem kind on a graph. A and B are the
/// penalty constants (defaults 1.0 / 1.01); B > A keeps every minimum feasible.
/// Maximum clique is built as the independent-set energy on the complement.
/// Maximum cut is expanded from spins s_i = 2 x_i - 1 into multilinear form.
EnergyPoly build_energy(ProblemKind kind, const Graph& g, double A = 1.0, double B = 1.01);

double energy_value(const EnergyPoly& e, const Assignment& x);

/// E[H(X)] for X ~ independent Bernoulli(q); exact by multilinearity.
double expected_energy(const EnergyPoly& e, const BernoulliField& q);
double expected_energy(const EnergyPoly& e, const double* q);

/// d expected_energy / d q_i for all i, scaled by w and accumulated into grad.
void expected_energy_grad(const EnergyPoly& e, const double* q, double w, double* grad);

/// Expected contribution of the terms containing variable i when x_i is pinned
/// to 1 (`on`) or 0 (`off`), the other variables held at values vals[j].
/// E[H] = rest + v * on + (1 - v) * off for v in {0, 1}.
struct VarMarginal {
  double on = 0.0, off = 0.0;
};
VarMarginal var_marginal(const EnergyPoly& e, int i, const double* vals);

bool is_feasible(ProblemKind kind, const Graph& g, const Assignment& x);

/// Reported solution size: set cardinality, or cut size for max-cut.
double objective_size(ProblemKind kind, const Graph& g, const Assignment& x);

/// A CO instance prepared for the sampler: original graph, graph the network
/// passes messages on (the complement for maximum clique), and its energy.
struct ProblemInstance {
  ProblemKind kind;
  Graph graph;
  Graph working;
  Adjacency adj;
  EnergyPoly energy;

  ProblemInstance(Graph g, ProblemKind kind, double A = 1.0, double B = 1.01);
  int num_nodes() const { return graph.num_nodes; }
};

}  // namespace codiff
