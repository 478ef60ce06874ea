#pragma once

#include "lstdac/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lstdac {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

struct Transition {
  StateIndex next;
  double prob;

  bool operator==(const Transition&) const = default;
};

/**
 * Tabular finite MDP.
 *
 * Transition rows are stored per (state, action) as successor lists sorted by
 * ascending next-state index; `prob(x, u, j)` gives dense-style lookup. Rows
 * and costs of unavailable actions are kept but ignored by every consumer.
 */
class FiniteMdp {
public:
  FiniteMdp() = default;
  FiniteMdp(std::size_t num_states, std::size_t num_actions, StateIndex initial_state,
            std::optional<StateIndex> termination_state = std::nullopt);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  StateIndex initial_state() const { return initial_state_; }
  std::optional<StateIndex> termination_state() const { return termination_state_; }

  void set_initial_state(StateIndex x);
  void set_termination_state(std::optional<StateIndex> x);

  bool available(StateIndex x, ActionIndex u) const { return available_[index(x, u)] != 0; }
  void set_available(StateIndex x, ActionIndex u, bool on);
  std::vector<ActionIndex> available_actions(StateIndex x) const;

  std::span<const Transition> row(StateIndex x, ActionIndex u) const { return rows_[index(x, u)]; }

  /// Replaces the successor list of (x, u). Entries are sorted by next state,
  /// duplicates are summed, exact zeros are dropped. Out-of-range successors
  /// throw; any other defect (negative mass, bad sums) is left for
  /// validate_mdp to report.
  void set_row(StateIndex x, ActionIndex u, std::vector<Transition> entries);

  double prob(StateIndex x, ActionIndex u, StateIndex j) const;

  double cost(StateIndex x, ActionIndex u) const { return cost_[index(x, u)]; }
  void set_cost(StateIndex x, ActionIndex u, double c);

  bool operator==(const FiniteMdp&) const = default;

private:
  std::size_t index(StateIndex x, ActionIndex u) const { return x * num_actions_ + u; }
  void check_state(StateIndex x, const char* what) const;
  void check_pair(StateIndex x, ActionIndex u) const;

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  StateIndex initial_state_ = 0;
  std::optional<StateIndex> termination_state_;
  std::vector<char> available_;
  std::vector<std::vector<Transition>> rows_;
  std::vector<double> cost_;
};

struct Violation {
  StateIndex state;
  std::optional<ActionIndex> action;
  std::string rule;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

/// Checks every FiniteMdp invariant; the report is empty iff all hold.
ValidationReport validate_mdp(const FiniteMdp& mdp);

std::string format_report(const ValidationReport& report);

/**
 * True iff every state outside `excluded` can reach `goal_states` with
 * positive probability under some sequence of available actions.
 *
 * This is a graph question: edges are (x -> j) with trans(j|x,u) > 0 for some
 * available u. Pass the unsafe set as `excluded` for reachability problems.
 */
bool assert_proper_reachable(const FiniteMdp& mdp, std::span<const StateIndex> goal_states,
                             std::span<const StateIndex> excluded = {});

/// Policy parameter vector theta.
struct PolicyParams {
  Eigen::VectorXd theta;

  PolicyParams() = default;
  explicit PolicyParams(Eigen::VectorXd t) : theta(std::move(t)) {}
  PolicyParams(std::initializer_list<double> values);

  std::size_t dim() const { return static_cast<std::size_t>(theta.size()); }
  bool finite() const { return theta.allFinite(); }
};

/**
 * Randomized stationary policy contract.
 *
 * action_probs must sum to one and vanish exactly on unavailable actions;
 * psi is the score vector grad_theta ln mu(u|x), zero on unavailable actions.
 */
class Rsp {
public:
  virtual ~Rsp() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;

  virtual Eigen::VectorXd action_probs(const PolicyParams& params, StateIndex x) const = 0;
  virtual Eigen::VectorXd psi(const PolicyParams& params, StateIndex x, ActionIndex u) const = 0;
};

/// Draws the successor of (x, u) by inverse CDF over ascending next-state index.
StateIndex sample_transition(const FiniteMdp& mdp, StateIndex x, ActionIndex u, Rng& rng);

struct TrajectoryStep {
  StateIndex state;
  ActionIndex action;
  double cost;

  bool operator==(const TrajectoryStep&) const = default;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  StateIndex final_state = 0;
  bool terminated = false;

  double total_cost() const;
  bool operator==(const Trajectory&) const = default;
};

inline constexpr std::size_t kDefaultMaxSteps = 100000;

/// One episode from x0 under the policy, stopping at the first visit to the
/// termination state or after `max_steps` transitions (terminated = false).
Trajectory sample_trajectory(const FiniteMdp& mdp, const Rsp& rsp, const PolicyParams& params,
                             Rng& rng, std::size_t max_steps = kDefaultMaxSteps);

/// Throws std::invalid_argument unless params.dim() == rsp.dim().
void check_policy_dim(const Rsp& rsp, const PolicyParams& params);

} // namespace lstdac
