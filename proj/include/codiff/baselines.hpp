#pragma once

#include <utility>

#include "codiff/energy.hpp"
#include "codiff/rng.hpp"

namespace codiff::baselines {

inline constexpr int kBruteForceCap = 26;

/// Exact minimum by exhaustive enumeration, num_vars <= 26. Ties are broken
/// toward the assignment with the lowest binary value (bit i as 2^i).
std::pair<Assignment, double> brute_force(const EnergyPoly& e);

/// Problem-specific degree-ordered greedy; always feasible.
Assignment greedy(ProblemKind kind, const Graph& g);

struct AnnealSchedule {
  double t_start = 2.0;
  double t_end = 0.0;  // linear decay
  double at(int step, int total) const {
    return total <= 1 ? t_end : t_start + (t_end - t_start) * double(step) / double(total - 1);
  }
};

/// Damped synchronous mean-field sweeps q_i <- sigmoid(-dE_i / T) while
/// annealing T to zero, then rounding plus one conditional-expectation repair
/// pass over the rounded corner.
Assignment mean_field_anneal(const EnergyPoly& e, int sweeps, const AnnealSchedule& sched,
                             Rng& rng);

/// Single-flip Metropolis chain with linear temperature decay; returns the
/// best state seen.
Assignment simulated_anneal(const EnergyPoly& e, int steps, const AnnealSchedule& sched,
                            Rng& rng);

}  // namespace codiff::baselines
