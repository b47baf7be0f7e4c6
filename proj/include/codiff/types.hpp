#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace codiff {

/// Binary solution vector, one {0,1} entry per node.
using Assignment = std::vector<std::uint8_t>;

enum class ProblemKind { MIS, MDS, MaxCl, MaxCut, MVC };

const char* to_string(ProblemKind k);
ProblemKind problem_kind_from_string(const std::string& s);

/// Probabilities are clamped into [kProbEps, 1-kProbEps] before any logarithm.
inline constexpr double kProbEps = 1e-7;

/// Per-node independent Bernoulli probabilities; one conditional step of the
/// reverse process.
struct BernoulliField {
  std::vector<double> p;

  BernoulliField() = default;
  explicit BernoulliField(std::vector<double> probs) : p(std::move(probs)) { clamp(); }

  int size() const { return static_cast<int>(p.size()); }
  void clamp();
};

struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace codiff
