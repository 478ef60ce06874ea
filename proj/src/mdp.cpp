#include "lstdac/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace lstdac {

FiniteMdp::FiniteMdp(std::size_t num_states, std::size_t num_actions, StateIndex initial_state,
                     std::optional<StateIndex> termination_state)
    : num_states_(num_states),
      num_actions_(num_actions),
      initial_state_(initial_state),
      termination_state_(termination_state),
      available_(num_states * num_actions, 0),
      rows_(num_states * num_actions),
      cost_(num_states * num_actions, 0.0) {
  if (num_states == 0 || num_actions == 0) {
    throw std::invalid_argument("FiniteMdp: need at least one state and one action");
  }
  check_state(initial_state, "initial state");
  if (termination_state) check_state(*termination_state, "termination state");
}

void FiniteMdp::check_state(StateIndex x, const char* what) const {
  if (x >= num_states_) {
    throw std::out_of_range(std::string("FiniteMdp: ") + what + " " + std::to_string(x) +
                            " out of range");
  }
}

void FiniteMdp::check_pair(StateIndex x, ActionIndex u) const {
  check_state(x, "state");
  if (u >= num_actions_) {
    throw std::out_of_range("FiniteMdp: action " + std::to_string(u) + " out of range");
  }
}

void FiniteMdp::set_initial_state(StateIndex x) {
  check_state(x, "initial state");
  initial_state_ = x;
}

void FiniteMdp::set_termination_state(std::optional<StateIndex> x) {
  if (x) check_state(*x, "termination state");
  termination_state_ = x;
}

void FiniteMdp::set_available(StateIndex x, ActionIndex u, bool on) {
  check_pair(x, u);
  available_[index(x, u)] = on ? 1 : 0;
}

std::vector<ActionIndex> FiniteMdp::available_actions(StateIndex x) const {
  std::vector<ActionIndex> out;
  for (ActionIndex u = 0; u < num_actions_; ++u) {
    if (available(x, u)) out.push_back(u);
  }
  return out;
}

void FiniteMdp::set_row(StateIndex x, ActionIndex u, std::vector<Transition> entries) {
  check_pair(x, u);
  for (const auto& t : entries) check_state(t.next, "successor");
  std::sort(entries.begin(), entries.end(),
            [](const Transition& a, const Transition& b) { return a.next < b.next; });
  std::vector<Transition> merged;
  merged.reserve(entries.size());
  for (const auto& t : entries) {
    if (!merged.empty() && merged.back().next == t.next) {
      merged.back().prob += t.prob;
    } else {
      merged.push_back(t);
    }
  }
  std::erase_if(merged, [](const Transition& t) { return t.prob == 0.0; });
  rows_[index(x, u)] = std::move(merged);
}

double FiniteMdp::prob(StateIndex x, ActionIndex u, StateIndex j) const {
  const auto r = row(x, u);
  auto it = std::lower_bound(r.begin(), r.end(), j,
                             [](const Transition& t, StateIndex s) { return t.next < s; });
  return (it != r.end() && it->next == j) ? it->prob : 0.0;
}

void FiniteMdp::set_cost(StateIndex x, ActionIndex u, double c) {
  check_pair(x, u);
  cost_[index(x, u)] = c;
}

ValidationReport validate_mdp(const FiniteMdp& mdp) {
  ValidationReport report;
  const auto add = [&](StateIndex x, std::optional<ActionIndex> u, std::string rule,
                       std::string message) {
    report.push_back({x, u, std::move(rule), std::move(message)});
  };

  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    bool any = false;
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      any = true;
      double sum = 0.0;
      for (const auto& t : mdp.row(x, u)) {
        if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
          std::ostringstream os;
          os.precision(17);
          os << "probability " << t.prob << " to state " << t.next << " outside [0,1]";
          add(x, u, "prob-range", os.str());
        }
        sum += t.prob;
      }
      if (!(std::abs(sum - 1.0) <= 1e-12)) {
        std::ostringstream os;
        os << "row sum " << sum << " != 1";
        add(x, u, "row-sum", os.str());
      }
      if (!std::isfinite(mdp.cost(x, u))) add(x, u, "cost-finite", "cost is not finite");
    }
    if (!any) add(x, std::nullopt, "no-action", "state has no available action");
  }

  if (const auto term = mdp.termination_state()) {
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(*term, u)) continue;
      if (mdp.prob(*term, u, *term) != 1.0) {
        std::ostringstream os;
        os << "termination not absorbing (self-loop probability " << mdp.prob(*term, u, *term)
           << ")";
        add(*term, u, "termination-absorbing", os.str());
      }
      if (mdp.cost(*term, u) != 0.0) {
        add(*term, u, "termination-cost-free", "termination state carries nonzero cost");
      }
    }
  }
  return report;
}

std::string format_report(const ValidationReport& report) {
  std::ostringstream os;
  for (const auto& v : report) {
    os << "state " << v.state;
    if (v.action) os << " action " << *v.action;
    os << ": [" << v.rule << "] " << v.message << '\n';
  }
  return os.str();
}

bool assert_proper_reachable(const FiniteMdp& mdp, std::span<const StateIndex> goal_states,
                             std::span<const StateIndex> excluded) {
  const std::size_t n = mdp.num_states();
  // Reverse adjacency of the "some action can move x to j" graph.
  std::vector<std::vector<StateIndex>> preds(n);
  for (StateIndex x = 0; x < n; ++x) {
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      for (const auto& t : mdp.row(x, u)) {
        if (t.prob > 0.0 && t.next != x) preds[t.next].push_back(x);
      }
    }
  }
  std::vector<char> reached(n, 0);
  std::deque<StateIndex> queue;
  for (StateIndex g : goal_states) {
    if (g < n && !reached[g]) {
      reached[g] = 1;
      queue.push_back(g);
    }
  }
  while (!queue.empty()) {
    const StateIndex j = queue.front();
    queue.pop_front();
    for (StateIndex x : preds[j]) {
      if (!reached[x]) {
        reached[x] = 1;
        queue.push_back(x);
      }
    }
  }
  std::vector<char> skip(n, 0);
  for (StateIndex x : excluded) {
    if (x < n) skip[x] = 1;
  }
  for (StateIndex x = 0; x < n; ++x) {
    if (!skip[x] && !reached[x]) return false;
  }
  return true;
}

PolicyParams::PolicyParams(std::initializer_list<double> values)
    : theta(static_cast<Eigen::Index>(values.size())) {
  Eigen::Index i = 0;
  for (double v : values) theta[i++] = v;
}

StateIndex sample_transition(const FiniteMdp& mdp, StateIndex x, ActionIndex u, Rng& rng) {
  if (x >= mdp.num_states() || u >= mdp.num_actions() || !mdp.available(x, u)) {
    throw std::invalid_argument("sample_transition: action " + std::to_string(u) +
                                " not available at state " + std::to_string(x));
  }
  const auto r = mdp.row(x, u);
  const double v = rng.uniform();
  double cum = 0.0;
  for (const auto& t : r) {
    cum += t.prob;
    if (v < cum) return t.next;
  }
  if (r.empty()) throw std::invalid_argument("sample_transition: empty transition row");
  return r.back().next;
}

double Trajectory::total_cost() const {
  double total = 0.0;
  for (const auto& s : steps) total += s.cost;
  return total;
}

void check_policy_dim(const Rsp& rsp, const PolicyParams& params) {
  if (params.dim() != rsp.dim()) {
    throw std::invalid_argument("policy parameter dimension " + std::to_string(params.dim()) +
                                " does not match policy dimension " + std::to_string(rsp.dim()));
  }
}

Trajectory sample_trajectory(const FiniteMdp& mdp, const Rsp& rsp, const PolicyParams& params,
                             Rng& rng, std::size_t max_steps) {
  check_policy_dim(rsp, params);
  const auto term = mdp.termination_state();
  if (!term) throw std::invalid_argument("sample_trajectory: MDP has no termination state");

  Trajectory traj;
  StateIndex x = mdp.initial_state();
  traj.final_state = x;
  if (x == *term) {
    traj.terminated = true;
    return traj;
  }
  while (traj.steps.size() < max_steps) {
    const Eigen::VectorXd probs = rsp.action_probs(params, x);
    const ActionIndex u = rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
    traj.steps.push_back({x, u, mdp.cost(x, u)});
    x = sample_transition(mdp, x, u, rng);
    traj.final_state = x;
    if (x == *term) {
      traj.terminated = true;
      break;
    }
  }
  return traj;
}

} // namespace lstdac
