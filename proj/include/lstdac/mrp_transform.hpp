#pragma once

#include "lstdac/mdp.hpp"

#include <optional>
#include <vector>

namespace lstdac {

/// Maximal-reachability problem: reach a goal state while never entering an
/// unsafe state. Goal and unsafe states are absorbing in `mdp`, which carries
/// no termination state; x0 is `mdp.initial_state()`.
struct MrpProblem {
  FiniteMdp mdp;
  std::vector<StateIndex> goal_states;
  std::vector<StateIndex> unsafe_states;

  StateIndex initial_state() const { return mdp.initial_state(); }
  bool operator==(const MrpProblem&) const = default;
};

/// Every MrpProblem invariant plus validate_mdp on the underlying model.
ValidationReport validate_mrp(const MrpProblem& problem);

/**
 * Shortest-path form of an MrpProblem. Goal states are merged into a single
 * cost-free termination state (the last index); every unsafe state costs 1 and
 * jumps to x0 under all actions.
 */
struct SspProblem {
  FiniteMdp mdp;
  /// origin_map[s] is the MRP index of SSP state s; empty for the termination
  /// state.
  std::vector<std::optional<StateIndex>> origin_map;
  /// Unsafe states in SSP indices.
  std::vector<StateIndex> unsafe_states;

  StateIndex termination_state() const { return *mdp.termination_state(); }
  bool operator==(const SspProblem&) const = default;
};

/// Throws ValidationError when the input violates an MrpProblem invariant.
SspProblem mrp_to_ssp(const MrpProblem& problem);

/// Same chain with the termination state redirected to x0 with probability 1.
/// The result has no termination state; it is the single recurrent chain the
/// learner samples from.
FiniteMdp apply_restart_modification(const SspProblem& ssp);

/// Reachability probability implied by an expected number of unsafe visits:
/// 1 / (alpha + 1). Throws std::invalid_argument on negative or NaN input.
double reachability_from_cost(double alpha);

} // namespace lstdac
