#include "codiff/diffusion.hpp"

#include <cmath>

namespace codiff {

const char* to_string(NoiseKind k) {
  return k == NoiseKind::Categorical ? "categorical" : "annealed";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "categorical" || s == "cnd") return NoiseKind::Categorical;
  if (s == "annealed" || s == "and") return NoiseKind::Annealed;
  throw data_error("unknown noise kind: " + s);
}

static void check_step(int t, int t_steps) {
  if (t < 1 || t > t_steps) throw std::invalid_argument("diffusion step out of range");
}

double cnd_beta(int t, int t_steps) {
  check_step(t, t_steps);
  return 1.0 / double(t_steps - t + 2);
}

double and_beta(int t, int t_steps) {
  check_step(t, t_steps);
  return 1.0 - double(t) / double(t_steps);
}

double cnd_log_prob(const Assignment& x_t, const Assignment& x_prev, double beta_t) {
  if (x_t.size() != x_prev.size()) throw std::invalid_argument("cnd_log_prob: length mismatch");
  const double log_keep = std::log(1.0 - beta_t), log_flip = std::log(beta_t);
  double s = 0.0;
  for (std::size_t i = 0; i < x_t.size(); ++i) s += x_t[i] == x_prev[i] ? log_keep : log_flip;
  return s;
}

double cnd_expected_log_prob(const Assignment& x_t, const BernoulliField& q_prev, double beta_t) {
  if (static_cast<int>(x_t.size()) != q_prev.size())
    throw std::invalid_argument("cnd_expected_log_prob: length mismatch");
  const double log_keep = std::log(1.0 - beta_t), log_flip = std::log(beta_t);
  double s = 0.0;
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const double q = q_prev.p[i];
    // A bit matches when the previous state's bit equals x_t's bit.
    const double p_match = x_t[i] ? q : 1.0 - q;
    s += p_match * log_keep + (1.0 - p_match) * log_flip;
  }
  return s;
}

double and_log_prob_unnormalized(const Assignment& x_t, const EnergyPoly& e, double beta,
                                 double beta_t) {
  return -beta * beta_t * energy_value(e, x_t);
}

double and_expected_log_prob(const BernoulliField& q_t, const EnergyPoly& e, double beta,
                             double beta_t) {
  return -beta * beta_t * expected_energy(e, q_t);
}

double entropy(const BernoulliField& q) {
  double s = 0.0;
  for (double p : q.p) s -= p * std::log(p) + (1.0 - p) * std::log(1.0 - p);
  return s;
}

Assignment mf_sample(const BernoulliField& q, Rng& rng) {
  Assignment x(q.size());
  for (int i = 0; i < q.size(); ++i) x[i] = rng.uniform() < q.p[i];
  return x;
}

double mf_log_prob(const BernoulliField& q, const Assignment& x) {
  if (static_cast<int>(x.size()) != q.size())
    throw std::invalid_argument("mf_log_prob: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    s += x[i] ? std::log(q.p[i]) : std::log(1.0 - q.p[i]);
  return s;
}

Assignment sample_stationary(int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_stationary: n must be >= 1");
  Assignment x(n);
  for (int i = 0; i < n; ++i) x[i] = rng.uniform() < 0.5;
  return x;
}

}  // namespace codiff
