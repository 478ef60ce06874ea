#include "lstdac/mrp_transform.hpp"

#include "lstdac/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lstdac {

namespace {

std::vector<char> membership(std::size_t n, const std::vector<StateIndex>& states) {
  std::vector<char> in(n, 0);
  for (StateIndex x : states) {
    if (x < n) in[x] = 1;
  }
  return in;
}

bool absorbing(const FiniteMdp& mdp, StateIndex x) {
  bool any = false;
  for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
    if (!mdp.available(x, u)) continue;
    any = true;
    if (mdp.prob(x, u, x) != 1.0) return false;
  }
  return any;
}

} // namespace

ValidationReport validate_mrp(const MrpProblem& problem) {
  const FiniteMdp& mdp = problem.mdp;
  ValidationReport report = validate_mdp(mdp);
  const std::size_t n = mdp.num_states();

  if (mdp.termination_state()) {
    report.push_back({*mdp.termination_state(), std::nullopt, "mrp-no-termination",
                      "MRP model must not carry a termination state"});
  }
  if (problem.goal_states.empty()) {
    report.push_back({0, std::nullopt, "mrp-goal-nonempty", "goal set is empty"});
  }
  for (const auto* set : {&problem.goal_states, &problem.unsafe_states}) {
    for (StateIndex x : *set) {
      if (x >= n) {
        report.push_back({x, std::nullopt, "mrp-state-range", "state index out of range"});
      }
    }
  }
  if (!report.empty()) return report;

  const auto goal = membership(n, problem.goal_states);
  const auto unsafe = membership(n, problem.unsafe_states);
  for (StateIndex x = 0; x < n; ++x) {
    if (goal[x] && unsafe[x]) {
      report.push_back({x, std::nullopt, "mrp-disjoint", "state is both goal and unsafe"});
    }
    if ((goal[x] || unsafe[x]) && !absorbing(mdp, x)) {
      report.push_back({x, std::nullopt, "mrp-absorbing", "goal/unsafe state is not absorbing"});
    }
  }
  const StateIndex x0 = mdp.initial_state();
  if (goal[x0] || unsafe[x0]) {
    report.push_back({x0, std::nullopt, "mrp-initial-safe", "initial state is goal or unsafe"});
  }
  if (!assert_proper_reachable(mdp, problem.goal_states, problem.unsafe_states)) {
    report.push_back({x0, std::nullopt, "mrp-goal-reachable",
                      "some safe state cannot reach the goal set"});
  }
  return report;
}

SspProblem mrp_to_ssp(const MrpProblem& problem) {
  if (const auto report = validate_mrp(problem); !report.empty()) {
    throw ValidationError("mrp_to_ssp: invalid MRP problem\n" + format_report(report));
  }
  const FiniteMdp& m = problem.mdp;
  const std::size_t n_m = m.num_states();
  const auto goal = membership(n_m, problem.goal_states);
  const auto unsafe = membership(n_m, problem.unsafe_states);

  constexpr StateIndex kUnmapped = static_cast<StateIndex>(-1);
  std::vector<StateIndex> to_s(n_m, kUnmapped);
  SspProblem ssp;
  for (StateIndex x = 0; x < n_m; ++x) {
    if (goal[x]) continue;
    to_s[x] = ssp.origin_map.size();
    ssp.origin_map.emplace_back(x);
  }
  const StateIndex term = ssp.origin_map.size();
  ssp.origin_map.emplace_back(std::nullopt);
  const std::size_t n_s = ssp.origin_map.size();
  const StateIndex x0 = to_s[m.initial_state()];

  ssp.mdp = FiniteMdp(n_s, m.num_actions(), x0, term);
  for (StateIndex s = 0; s < term; ++s) {
    const StateIndex x = *ssp.origin_map[s];
    for (ActionIndex u = 0; u < m.num_actions(); ++u) {
      if (unsafe[x]) {
        ssp.mdp.set_available(s, u, true);
        ssp.mdp.set_row(s, u, {{x0, 1.0}});
        ssp.mdp.set_cost(s, u, 1.0);
        continue;
      }
      ssp.mdp.set_available(s, u, m.available(x, u));
      std::vector<Transition> row;
      double to_goal = 0.0;
      for (const auto& t : m.row(x, u)) {
        if (goal[t.next]) {
          to_goal += t.prob;
        } else {
          row.push_back({to_s[t.next], t.prob});
        }
      }
      if (to_goal != 0.0) row.push_back({term, to_goal});
      ssp.mdp.set_row(s, u, std::move(row));
      ssp.mdp.set_cost(s, u, 0.0);
    }
    if (unsafe[x]) ssp.unsafe_states.push_back(s);
  }
  for (ActionIndex u = 0; u < m.num_actions(); ++u) {
    ssp.mdp.set_available(term, u, true);
    ssp.mdp.set_row(term, u, {{term, 1.0}});
    ssp.mdp.set_cost(term, u, 0.0);
  }
  return ssp;
}

FiniteMdp apply_restart_modification(const SspProblem& ssp) {
  FiniteMdp out = ssp.mdp;
  const StateIndex term = ssp.termination_state();
  out.set_termination_state(std::nullopt);
  for (ActionIndex u = 0; u < out.num_actions(); ++u) {
    out.set_row(term, u, {{out.initial_state(), 1.0}});
  }
  return out;
}

double reachability_from_cost(double alpha) {
  if (!(alpha >= 0.0)) {
    throw std::invalid_argument("reachability_from_cost: expected cost must be nonnegative");
  }
  return 1.0 / (alpha + 1.0);
}

} // namespace lstdac
