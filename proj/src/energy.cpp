#include "codiff/energy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace codiff {

namespace {

void merge_terms(std::vector<EnergyTerm>& terms) {
  std::sort(terms.begin(), terms.end(), [](const EnergyTerm& a, const EnergyTerm& b) {
    if (a.vars.size() != b.vars.size()) return a.vars.size() < b.vars.size();
    return a.vars < b.vars;
  });
  std::vector<EnergyTerm> merged;
  for (auto& t : terms) {
    if (!merged.empty() && merged.back().vars == t.vars)
      merged.back().coeff += t.coeff;
    else
      merged.push_back(std::move(t));
  }
  std::erase_if(merged, [](const EnergyTerm& t) { return t.coeff == 0.0; });
  terms = std::move(merged);
}

void build_var_index(int num_vars, const std::vector<EnergyTerm>& terms,
                     std::vector<int>& offsets, std::vector<int>& index) {
  offsets.assign(num_vars + 1, 0);
  for (const auto& t : terms)
    for (int v : t.vars) ++offsets[v + 1];
  for (int v = 0; v < num_vars; ++v) offsets[v + 1] += offsets[v];
  index.resize(offsets[num_vars]);
  std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
  for (int ti = 0; ti < static_cast<int>(terms.size()); ++ti)
    for (int v : terms[ti].vars) index[cursor[v]++] = ti;
}

void finalize(EnergyPoly& e) {
  merge_terms(e.terms);
  merge_terms(e.comp_products);
  build_var_index(e.num_vars, e.terms, e.term_index_offsets, e.term_index);
  build_var_index(e.num_vars, e.comp_products, e.comp_index_offsets, e.comp_index);
}

}  // namespace

EnergyPoly build_energy(ProblemKind kind, const Graph& g, double A, double B) {
  if (kind != ProblemKind::MaxCut && !(A > 0.0 && B > A))
    throw std::invalid_argument("build_energy: need 0 < A < B, feasibility guarantee broken otherwise");
  if (kind == ProblemKind::MaxCl) {
    EnergyPoly e = build_energy(ProblemKind::MIS, complement(g), A, B);
    e.kind = ProblemKind::MaxCl;
    return e;
  }
  EnergyPoly e;
  e.num_vars = g.num_nodes;
  e.kind = kind;
  e.penalty_a = A;
  e.penalty_b = B;
  switch (kind) {
    case ProblemKind::MIS:
      for (int i = 0; i < g.num_nodes; ++i) e.terms.push_back({-A, {i}});
      for (auto [i, j] : g.edges) e.terms.push_back({B, {i, j}});
      break;
    case ProblemKind::MVC:
      // A sum x_i + B sum_(i,j) (1-x_i)(1-x_j), expanded.
      for (int i = 0; i < g.num_nodes; ++i) e.terms.push_back({A, {i}});
      for (auto [i, j] : g.edges) {
        e.terms.push_back({B, {}});
        e.terms.push_back({-B, {i}});
        e.terms.push_back({-B, {j}});
        e.terms.push_back({B, {i, j}});
      }
      break;
    case ProblemKind::MaxCut:
      // -(1 - s_i s_j)/2 per edge with s = 2x - 1 gives 2 x_i x_j - x_i - x_j.
      for (auto [i, j] : g.edges) {
        e.terms.push_back({-1.0, {i}});
        e.terms.push_back({-1.0, {j}});
        e.terms.push_back({2.0, {i, j}});
      }
      break;
    case ProblemKind::MDS: {
      Adjacency adj(g);
      for (int i = 0; i < g.num_nodes; ++i) e.terms.push_back({A, {i}});
      // Expand B * prod_{k in {i} u N(i)} (1 - x_k) node by node, cheapest
      // neighborhoods first; past the caps the product form is kept as is.
      std::vector<int> order(g.num_nodes);
      for (int i = 0; i < g.num_nodes; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return adj.degree(a) != adj.degree(b) ? adj.degree(a) < adj.degree(b) : a < b;
      });
      std::size_t term_count = e.terms.size();
      for (int i : order) {
        std::vector<int> hood(adj.begin(i), adj.end(i));
        hood.push_back(i);
        std::sort(hood.begin(), hood.end());
        const int d = static_cast<int>(hood.size());
        const std::size_t blowup = std::size_t{1} << d;
        if (adj.degree(i) > kMdsExpandDegreeCap || term_count + blowup > kMdsTermBudget) {
          e.comp_products.push_back({B, std::move(hood)});
          continue;
        }
        for (std::uint32_t mask = 0; mask < blowup; ++mask) {
          EnergyTerm t;
          t.coeff = (std::popcount(mask) % 2 == 0) ? B : -B;
          for (int b = 0; b < d; ++b)
            if (mask >> b & 1) t.vars.push_back(hood[b]);
          e.terms.push_back(std::move(t));
        }
        term_count += blowup;
      }
      break;
    }
    case ProblemKind::MaxCl:
      break;  // handled above
  }
  finalize(e);
  return e;
}

double energy_value(const EnergyPoly& e, const Assignment& x) {
  if (static_cast<int>(x.size()) != e.num_vars)
    throw std::invalid_argument("energy_value: assignment length mismatch");
  double total = 0.0;
  for (const auto& t : e.terms) {
    double prod = t.coeff;
    for (int v : t.vars)
      if (!x[v]) {
        prod = 0.0;
        break;
      }
    total += prod;
  }
  for (const auto& t : e.comp_products) {
    double prod = t.coeff;
    for (int v : t.vars)
      if (x[v]) {
        prod = 0.0;
        break;
      }
    total += prod;
  }
  return total;
}

double expected_energy(const EnergyPoly& e, const double* q) {
  double total = 0.0;
  for (const auto& t : e.terms) {
    double prod = t.coeff;
    for (int v : t.vars) prod *= q[v];
    total += prod;
  }
  for (const auto& t : e.comp_products) {
    double prod = t.coeff;
    for (int v : t.vars) prod *= 1.0 - q[v];
    total += prod;
  }
  return total;
}

double expected_energy(const EnergyPoly& e, const BernoulliField& q) {
  if (q.size() != e.num_vars)
    throw std::invalid_argument("expected_energy: field length mismatch");
  return expected_energy(e, q.p.data());
}

void expected_energy_grad(const EnergyPoly& e, const double* q, double w, double* grad) {
  // Leave-one-out products via prefix/suffix passes; exact near q = 0.
  std::vector<double> suffix;
  for (const auto& t : e.terms) {
    const int d = static_cast<int>(t.vars.size());
    if (d == 0) continue;
    if (d == 1) {
      grad[t.vars[0]] += w * t.coeff;
      continue;
    }
    if (d == 2) {
      grad[t.vars[0]] += w * t.coeff * q[t.vars[1]];
      grad[t.vars[1]] += w * t.coeff * q[t.vars[0]];
      continue;
    }
    suffix.assign(d, 1.0);
    for (int i = d - 2; i >= 0; --i) suffix[i] = suffix[i + 1] * q[t.vars[i + 1]];
    double prefix = 1.0;
    for (int i = 0; i < d; ++i) {
      grad[t.vars[i]] += w * t.coeff * prefix * suffix[i];
      prefix *= q[t.vars[i]];
    }
  }
  for (const auto& t : e.comp_products) {
    const int d = static_cast<int>(t.vars.size());
    suffix.assign(d, 1.0);
    for (int i = d - 2; i >= 0; --i) suffix[i] = suffix[i + 1] * (1.0 - q[t.vars[i + 1]]);
    double prefix = 1.0;
    for (int i = 0; i < d; ++i) {
      grad[t.vars[i]] -= w * t.coeff * prefix * suffix[i];
      prefix *= 1.0 - q[t.vars[i]];
    }
  }
}

VarMarginal var_marginal(const EnergyPoly& e, int i, const double* vals) {
  VarMarginal m;
  for (int k = e.term_index_offsets[i]; k < e.term_index_offsets[i + 1]; ++k) {
    const EnergyTerm& t = e.terms[e.term_index[k]];
    double prod = t.coeff;
    for (int v : t.vars)
      if (v != i) prod *= vals[v];
    m.on += prod;
  }
  for (int k = e.comp_index_offsets[i]; k < e.comp_index_offsets[i + 1]; ++k) {
    const EnergyTerm& t = e.comp_products[e.comp_index[k]];
    double prod = t.coeff;
    for (int v : t.vars)
      if (v != i) prod *= 1.0 - vals[v];
    m.off += prod;
  }
  return m;
}

bool is_feasible(ProblemKind kind, const Graph& g, const Assignment& x) {
  if (static_cast<int>(x.size()) != g.num_nodes)
    throw std::invalid_argument("is_feasible: assignment length mismatch");
  switch (kind) {
    case ProblemKind::MIS:
      for (auto [i, j] : g.edges)
        if (x[i] && x[j]) return false;
      return true;
    case ProblemKind::MVC:
      for (auto [i, j] : g.edges)
        if (!x[i] && !x[j]) return false;
      return true;
    case ProblemKind::MDS: {
      Adjacency adj(g);
      for (int i = 0; i < g.num_nodes; ++i) {
        if (x[i]) continue;
        bool covered = false;
        for (const int* n = adj.begin(i); n != adj.end(i); ++n)
          if (x[*n]) {
            covered = true;
            break;
          }
        if (!covered) return false;
      }
      return true;
    }
    case ProblemKind::MaxCl:
      return is_feasible(ProblemKind::MIS, complement(g), x);
    case ProblemKind::MaxCut:
      return true;
  }
  return false;
}

ProblemInstance::ProblemInstance(Graph g, ProblemKind k, double A, double B)
    : kind(k),
      graph(std::move(g)),
      working(kind == ProblemKind::MaxCl ? complement(graph) : graph),
      adj(working),
      energy(build_energy(kind, graph, A, B)) {}

double objective_size(ProblemKind kind, const Graph& g, const Assignment& x) {
  if (static_cast<int>(x.size()) != g.num_nodes)
    throw std::invalid_argument("objective_size: assignment length mismatch");
  if (kind == ProblemKind::MaxCut) {
    int cut = 0;
    for (auto [i, j] : g.edges) cut += x[i] != x[j];
    return cut;
  }
  int size = 0;
  for (auto b : x) size += b;
  return size;
}

}  // namespace codiff
