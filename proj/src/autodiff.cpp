#include "codiff/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "codiff/kernels.hpp"

namespace codiff::ad {

int Tape::push(Op op, int rows, int cols, bool needs_grad) {
  Node n;
  n.op = op;
  n.needs_grad = needs_grad;
  n.rows = rows;
  n.cols = cols;
  n.val = static_cast<int>(values_.size());
  values_.resize(values_.size() + std::size_t(rows) * cols, 0.0);
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(const double* data, int rows, int cols) {
  const int id = push(Op::Leaf, rows, cols, true);
  std::memcpy(val(id), data, sizeof(double) * size_of(id));
  return id;
}

int Tape::constant(const double* data, int rows, int cols) {
  const int id = push(Op::Const, rows, cols, false);
  std::memcpy(val(id), data, sizeof(double) * size_of(id));
  return id;
}

int Tape::linear(int x, int w, int b) {
  const Node nx = nodes_[x];  // copy: push() may reallocate nodes_
  const Node nw = nodes_[w];
  if (nx.cols != nw.cols || nodes_[b].rows * nodes_[b].cols != nw.rows)
    throw std::invalid_argument("linear: shape mismatch");
  const int id = push(Op::Linear, nx.rows, nw.rows,
                      nx.needs_grad || nw.needs_grad || nodes_[b].needs_grad);
  auto& n = nodes_[id];
  n.a = x;
  n.b = w;
  n.c = b;
  kern::ops().matmul_nt(val(x), val(w), val(id), nx.rows, nw.rows, nx.cols, false);
  const double* bias = val(b);
  for (int r = 0; r < nx.rows; ++r)
    kern::ops().axpy(val(id) + std::size_t(r) * nw.rows, bias, 1.0, nw.rows);
  return id;
}

int Tape::neighbor_sum(int x, const Adjacency* adj_ptr) {
  const Node nx = nodes_[x];  // copy: push() may reallocate nodes_
  const int id = push(Op::NeighborSum, nx.rows, nx.cols, nx.needs_grad);
  auto& n = nodes_[id];
  n.a = x;
  n.ext = adj_ptr;
  const int c = nx.cols;
  for (int v = 0; v < nx.rows; ++v) {
    double* out = val(id) + std::size_t(v) * c;
    for (const int* u = adj_ptr->begin(v); u != adj_ptr->end(v); ++u)
      kern::ops().axpy(out, val(x) + std::size_t(*u) * c, 1.0, c);
  }
  return id;
}

int Tape::add(int a, int b) {
  const Node na = nodes_[a];
  if (na.rows != nodes_[b].rows || na.cols != nodes_[b].cols)
    throw std::invalid_argument("add: shape mismatch");
  const int id = push(Op::Add, na.rows, na.cols, na.needs_grad || nodes_[b].needs_grad);
  nodes_[id].a = a;
  nodes_[id].b = b;
  kern::ops().add(val(id), val(a), val(b), static_cast<int>(size_of(id)));
  return id;
}

int Tape::scale(int a, double s) {
  const Node na = nodes_[a];
  const int id = push(Op::Scale, na.rows, na.cols, na.needs_grad);
  nodes_[id].a = a;
  nodes_[id].d0 = s;
  const double* in = val(a);
  double* out = val(id);
  for (std::size_t i = 0; i < size_of(id); ++i) out[i] = s * in[i];
  return id;
}

int Tape::relu(int a) {
  const Node na = nodes_[a];
  const int id = push(Op::Relu, na.rows, na.cols, na.needs_grad);
  nodes_[id].a = a;
  kern::ops().relu_fwd(val(id), val(a), static_cast<int>(size_of(id)));
  return id;
}

int Tape::layer_norm(int x, int gain, int offset) {
  const Node nx = nodes_[x];  // copy: push() may reallocate nodes_
  const int id = push(Op::LayerNorm, nx.rows, nx.cols,
                      nx.needs_grad || nodes_[gain].needs_grad || nodes_[offset].needs_grad);
  auto& n = nodes_[id];
  n.a = x;
  n.b = gain;
  n.c = offset;
  n.aux = static_cast<int>(aux_.size());
  aux_.resize(aux_.size() + 2 * std::size_t(nx.rows));  // mean, inv std per row
  const int c = nx.cols;
  for (int r = 0; r < nx.rows; ++r) {
    const double* in = val(x) + std::size_t(r) * c;
    const double mean = kern::ops().sum(in, c) / c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= c;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    aux_[nodes_[id].aux + 2 * r] = mean;
    aux_[nodes_[id].aux + 2 * r + 1] = inv;
    double* out = val(id) + std::size_t(r) * c;
    const double* g = val(gain);
    const double* o = val(offset);
    for (int j = 0; j < c; ++j) out[j] = g[j] * (in[j] - mean) * inv + o[j];
  }
  return id;
}

int Tape::sigmoid_clamp(int z, double eps) {
  const Node nz = nodes_[z];
  const int id = push(Op::SigmoidClamp, nz.rows, nz.cols, nz.needs_grad);
  nodes_[id].a = z;
  nodes_[id].d0 = eps;
  const double* in = val(z);
  double* out = val(id);
  for (std::size_t i = 0; i < size_of(id); ++i) {
    double s = 1.0 / (1.0 + std::exp(-in[i]));
    if (s < eps) s = eps;
    if (s > 1.0 - eps) s = 1.0 - eps;
    out[i] = s;
  }
  return id;
}

int Tape::entropy_term(int q) {
  const int id = push(Op::Entropy, 1, 1, nodes_[q].needs_grad);
  nodes_[id].a = q;
  const double* p = val(q);
  double s = 0.0;
  for (std::size_t i = 0; i < size_of(q); ++i)
    s -= p[i] * std::log(p[i]) + (1.0 - p[i]) * std::log(1.0 - p[i]);
  val(id)[0] = s;
  return id;
}

int Tape::expected_energy_term(int q, const EnergyPoly* e) {
  if (static_cast<int>(size_of(q)) != e->num_vars)
    throw std::invalid_argument("expected_energy_term: length mismatch");
  const int id = push(Op::ExpectedEnergy, 1, 1, nodes_[q].needs_grad);
  nodes_[id].a = q;
  nodes_[id].ext = e;
  val(id)[0] = expected_energy(*e, val(q));
  return id;
}

int Tape::cnd_noise_term(int q, const Assignment* x_t, double beta_t) {
  if (size_of(q) != x_t->size()) throw std::invalid_argument("cnd_noise_term: length mismatch");
  const int id = push(Op::CndNoise, 1, 1, nodes_[q].needs_grad);
  nodes_[id].a = q;
  nodes_[id].ext = x_t;
  nodes_[id].d0 = beta_t;
  const double lk = std::log(1.0 - beta_t), lf = std::log(beta_t);
  const double* p = val(q);
  double s = 0.0;
  for (std::size_t i = 0; i < x_t->size(); ++i) {
    const double pm = (*x_t)[i] ? p[i] : 1.0 - p[i];
    s += pm * lk + (1.0 - pm) * lf;
  }
  val(id)[0] = s;
  return id;
}

int Tape::mf_log_prob_term(int q, const Assignment* x) {
  if (size_of(q) != x->size()) throw std::invalid_argument("mf_log_prob_term: length mismatch");
  const int id = push(Op::MfLogProb, 1, 1, nodes_[q].needs_grad);
  nodes_[id].a = q;
  nodes_[id].ext = x;
  const double* p = val(q);
  double s = 0.0;
  for (std::size_t i = 0; i < x->size(); ++i)
    s += (*x)[i] ? std::log(p[i]) : std::log(1.0 - p[i]);
  val(id)[0] = s;
  return id;
}

int Tape::dot(int a, int b) {
  if (size_of(a) != size_of(b)) throw std::invalid_argument("dot: size mismatch");
  const int id = push(Op::Dot, 1, 1, nodes_[a].needs_grad || nodes_[b].needs_grad);
  nodes_[id].a = a;
  nodes_[id].b = b;
  val(id)[0] = kern::ops().dot(val(a), val(b), static_cast<int>(size_of(a)));
  return id;
}

int Tape::sum_all(int a) {
  const int id = push(Op::Sum, 1, 1, nodes_[a].needs_grad);
  nodes_[id].a = a;
  val(id)[0] = kern::ops().sum(val(a), static_cast<int>(size_of(a)));
  return id;
}

int Tape::mul(int a, int b) {
  if (size_of(a) != size_of(b)) throw std::invalid_argument("mul: size mismatch");
  const Node na = nodes_[a];
  const int id = push(Op::Mul, na.rows, na.cols, na.needs_grad || nodes_[b].needs_grad);
  nodes_[id].a = a;
  nodes_[id].b = b;
  const double* x = val(a);
  const double* y = val(b);
  double* out = val(id);
  for (std::size_t i = 0; i < size_of(id); ++i) out[i] = x[i] * y[i];
  return id;
}

int Tape::exp_scalar(int a) {
  if (size_of(a) != 1) throw std::invalid_argument("exp_scalar: scalar expected");
  const int id = push(Op::Exp, 1, 1, nodes_[a].needs_grad);
  nodes_[id].a = a;
  val(id)[0] = std::exp(val(a)[0]);
  return id;
}

int Tape::combine(std::span<const int> parts, std::span<const double> coeffs, double c0) {
  if (parts.size() != coeffs.size()) throw std::invalid_argument("combine: arity mismatch");
  bool needs = false;
  double s = c0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (size_of(parts[i]) != 1) throw std::invalid_argument("combine: scalar parts expected");
    needs = needs || nodes_[parts[i]].needs_grad;
    s += coeffs[i] * val(parts[i])[0];
  }
  const int id = push(Op::Combine, 1, 1, needs);
  auto& n = nodes_[id];
  n.iaux = static_cast<int>(iaux_.size());
  n.aux = static_cast<int>(aux_.size());
  n.count = static_cast<int>(parts.size());
  iaux_.insert(iaux_.end(), parts.begin(), parts.end());
  aux_.insert(aux_.end(), coeffs.begin(), coeffs.end());
  val(id)[0] = s;
  return id;
}

void Tape::backward(int root) {
  if (size_of(root) != 1) throw std::invalid_argument("backward: root must be scalar");
  adjoints_.assign(values_.size(), 0.0);
  adj(root)[0] = 1.0;
  for (int id = root; id >= 0; --id)
    if (nodes_[id].needs_grad) backward_node(id);
}

void Tape::backward_node(int id) {
  const Node& n = nodes_[id];
  const double* dy = adj(id);
  const auto& K = kern::ops();
  switch (n.op) {
    case Op::Leaf:
    case Op::Const:
      break;
    case Op::Linear: {
      const Node& nx = nodes_[n.a];
      const Node& nw = nodes_[n.b];
      if (nx.needs_grad) K.matmul_nn(dy, val(n.b), adj(n.a), nx.rows, nx.cols, nw.rows, true);
      if (nw.needs_grad) K.matmul_tn(dy, val(n.a), adj(n.b), nw.rows, nw.cols, nx.rows, true);
      if (nodes_[n.c].needs_grad) {
        double* db = adj(n.c);
        for (int r = 0; r < nx.rows; ++r)
          K.axpy(db, dy + std::size_t(r) * nw.rows, 1.0, nw.rows);
      }
      break;
    }
    case Op::NeighborSum: {
      const auto* adj_ptr = static_cast<const Adjacency*>(n.ext);
      double* dx = adj(n.a);
      const int c = n.cols;
      for (int v = 0; v < n.rows; ++v) {
        const double* row = dy + std::size_t(v) * c;
        for (const int* u = adj_ptr->begin(v); u != adj_ptr->end(v); ++u)
          K.axpy(dx + std::size_t(*u) * c, row, 1.0, c);
      }
      break;
    }
    case Op::Add: {
      const int sz = static_cast<int>(size_of(id));
      if (nodes_[n.a].needs_grad) K.axpy(adj(n.a), dy, 1.0, sz);
      if (nodes_[n.b].needs_grad) K.axpy(adj(n.b), dy, 1.0, sz);
      break;
    }
    case Op::Scale:
      K.axpy(adj(n.a), dy, n.d0, static_cast<int>(size_of(id)));
      break;
    case Op::Relu:
      K.relu_bwd(adj(n.a), val(n.a), dy, static_cast<int>(size_of(id)));
      break;
    case Op::LayerNorm: {
      const int c = n.cols;
      const double* x = val(n.a);
      const double* g = val(n.b);
      double* dx = nodes_[n.a].needs_grad ? adj(n.a) : nullptr;
      double* dg = nodes_[n.b].needs_grad ? adj(n.b) : nullptr;
      double* doff = nodes_[n.c].needs_grad ? adj(n.c) : nullptr;
      for (int r = 0; r < n.rows; ++r) {
        const double mean = aux_[n.aux + 2 * r];
        const double inv = aux_[n.aux + 2 * r + 1];
        const double* xr = x + std::size_t(r) * c;
        const double* dyr = dy + std::size_t(r) * c;
        double m1 = 0.0, m2 = 0.0;  // mean(dxhat), mean(dxhat * xhat)
        for (int j = 0; j < c; ++j) {
          const double xhat = (xr[j] - mean) * inv;
          const double dxhat = dyr[j] * g[j];
          m1 += dxhat;
          m2 += dxhat * xhat;
          if (dg) dg[j] += dyr[j] * xhat;
          if (doff) doff[j] += dyr[j];
        }
        if (!dx) continue;
        m1 /= c;
        m2 /= c;
        double* dxr = dx + std::size_t(r) * c;
        for (int j = 0; j < c; ++j) {
          const double xhat = (xr[j] - mean) * inv;
          dxr[j] += inv * (dyr[j] * g[j] - m1 - xhat * m2);
        }
      }
      break;
    }
    case Op::SigmoidClamp: {
      const double eps = n.d0;
      const double* y = val(id);
      double* dz = adj(n.a);
      for (std::size_t i = 0; i < size_of(id); ++i)
        if (y[i] > eps && y[i] < 1.0 - eps) dz[i] += dy[i] * y[i] * (1.0 - y[i]);
      break;
    }
    case Op::Entropy: {
      const double seed = dy[0];
      const double* p = val(n.a);
      double* dq = adj(n.a);
      for (std::size_t i = 0; i < size_of(n.a); ++i)
        dq[i] += seed * std::log((1.0 - p[i]) / p[i]);
      break;
    }
    case Op::ExpectedEnergy:
      expected_energy_grad(*static_cast<const EnergyPoly*>(n.ext), val(n.a), dy[0], adj(n.a));
      break;
    case Op::CndNoise: {
      const auto* x = static_cast<const Assignment*>(n.ext);
      const double diff = std::log(1.0 - n.d0) - std::log(n.d0);
      const double seed = dy[0];
      double* dq = adj(n.a);
      for (std::size_t i = 0; i < x->size(); ++i) dq[i] += seed * ((*x)[i] ? diff : -diff);
      break;
    }
    case Op::MfLogProb: {
      const auto* x = static_cast<const Assignment*>(n.ext);
      const double seed = dy[0];
      const double* p = val(n.a);
      double* dq = adj(n.a);
      for (std::size_t i = 0; i < x->size(); ++i)
        dq[i] += seed * ((*x)[i] ? 1.0 / p[i] : -1.0 / (1.0 - p[i]));
      break;
    }
    case Op::Dot: {
      const double seed = dy[0];
      const int sz = static_cast<int>(size_of(n.a));
      if (nodes_[n.a].needs_grad) K.axpy(adj(n.a), val(n.b), seed, sz);
      if (nodes_[n.b].needs_grad) K.axpy(adj(n.b), val(n.a), seed, sz);
      break;
    }
    case Op::Sum: {
      const double seed = dy[0];
      double* dx = adj(n.a);
      for (std::size_t i = 0; i < size_of(n.a); ++i) dx[i] += seed;
      break;
    }
    case Op::Mul: {
      const int sz = static_cast<int>(size_of(id));
      if (nodes_[n.a].needs_grad) {
        const double* y = val(n.b);
        double* da = adj(n.a);
        for (int i = 0; i < sz; ++i) da[i] += dy[i] * y[i];
      }
      if (nodes_[n.b].needs_grad) {
        const double* x = val(n.a);
        double* db = adj(n.b);
        for (int i = 0; i < sz; ++i) db[i] += dy[i] * x[i];
      }
      break;
    }
    case Op::Exp:
      adj(n.a)[0] += dy[0] * val(id)[0];
      break;
    case Op::Combine:
      for (int i = 0; i < n.count; ++i) {
        const int part = iaux_[n.iaux + i];
        if (nodes_[part].needs_grad) adj(part)[0] += dy[0] * aux_[n.aux + i];
      }
      break;
  }
}

std::span<const double> Tape::value(int id) const { return {val(id), size_of(id)}; }

std::span<const double> Tape::adjoint(int id) const {
  return {adjoints_.data() + nodes_[id].val, size_of(id)};
}

void Tape::reset() {
  nodes_.clear();
  values_.clear();
  adjoints_.clear();
  aux_.clear();
  iaux_.clear();
}

}  // namespace codiff::ad
