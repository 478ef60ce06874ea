#pragma once
// Small hand-built problems and independent reference computations shared by
// the test executables. Nothing here calls into the library's oracles.

#include "lstdac/boltzmann.hpp"
#include "lstdac/mdp.hpp"
#include "lstdac/mrp_transform.hpp"
#include "lstdac/rng.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

namespace fx {

using namespace lstdac;

// x0 --(any action)--> goal w.p. q, unsafe w.p. 1-q.
inline MrpProblem coin_mrp(double q) {
  MrpProblem p;
  p.mdp = FiniteMdp(3, 1, 0);
  p.mdp.set_available(0, 0, true);
  p.mdp.set_row(0, 0, {{1, q}, {2, 1.0 - q}});
  for (StateIndex s : {1, 2}) {
    p.mdp.set_available(s, 0, true);
    p.mdp.set_row(s, 0, {{s, 1.0}});
  }
  p.goal_states = {1};
  p.unsafe_states = {2};
  return p;
}

// Random MRP: `safe` transient states (x0 = 0), then `goals` goal states, then
// `unsafe` unsafe states. Every safe action puts at least 0.05 on some goal
// from state 0 onwards through a chain so the goal is reachable.
inline MrpProblem random_mrp(std::uint64_t seed, std::size_t safe, std::size_t goals,
                             std::size_t unsafe, std::size_t actions) {
  Rng rng(seed);
  const std::size_t n = safe + goals + unsafe;
  MrpProblem p;
  p.mdp = FiniteMdp(n, actions, 0);
  for (std::size_t x = 0; x < safe; ++x) {
    bool any = false;
    for (ActionIndex u = 0; u < actions; ++u) {
      const bool on = (u == 0) || rng.uniform() < 0.7;
      if (!on) continue;
      any = true;
      p.mdp.set_available(x, u, true);
      std::vector<Transition> row;
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (rng.uniform() < 0.5) continue;
        const double w = rng.uniform() + 0.01;
        row.push_back({j, w});
        total += w;
      }
      // guarantee progress towards the first goal
      row.push_back({safe, 0.2 * (total + 0.01)});
      total += 0.2 * (total + 0.01);
      for (auto& t : row) t.prob /= total;
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < row.size(); ++i) s += row[i].prob;
      row.back().prob = 1.0 - s;
      p.mdp.set_row(x, u, row);
      p.mdp.set_cost(x, u, 0.0);
    }
    (void)any;
  }
  for (std::size_t s = safe; s < n; ++s) {
    p.mdp.set_available(s, 0, true);
    p.mdp.set_row(s, 0, {{s, 1.0}});
    (s < safe + goals ? p.goal_states : p.unsafe_states).push_back(s);
  }
  return p;
}

// Features drawn uniformly from [-1, 1] on the available pairs of `mdp`.
inline std::shared_ptr<TabularFeatures> random_features(const FiniteMdp& mdp, std::size_t dim,
                                                        std::uint64_t seed) {
  Rng rng(seed);
  auto f = std::make_shared<TabularFeatures>(mdp, dim);
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      Eigen::VectorXd phi(static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < phi.size(); ++i) phi[i] = 2.0 * rng.uniform() - 1.0;
      f->set_features(x, u, phi);
    }
  }
  return f;
}

inline Eigen::VectorXd random_theta(Rng& rng, std::size_t dim, double scale) {
  Eigen::VectorXd t(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = scale * (2.0 * rng.uniform() - 1.0);
  return t;
}

// Softmax written out directly, no max shift, for moderate exponents.
inline Eigen::VectorXd naive_softmax(const FeatureProvider& f, const Eigen::VectorXd& theta,
                                     StateIndex x) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(f.num_actions()));
  double z = 0.0;
  for (ActionIndex u = 0; u < f.num_actions(); ++u) {
    if (!f.available(x, u)) continue;
    p[static_cast<Eigen::Index>(u)] = std::exp(theta.dot(f.features(x, u)));
    z += p[static_cast<Eigen::Index>(u)];
  }
  return p / z;
}

// Dense policy transition matrix P(x, j) = sum_u mu(u|x) p(j|x,u).
inline Eigen::MatrixXd dense_policy_matrix(const FiniteMdp& mdp, const Rsp& rsp,
                                           const PolicyParams& params) {
  const auto n = static_cast<Eigen::Index>(mdp.num_states());
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    const Eigen::VectorXd mu = rsp.action_probs(params, x);
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      for (const auto& t : mdp.row(x, u)) {
        P(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(t.next)) += mu[static_cast<Eigen::Index>(u)] * t.prob;
      }
    }
  }
  return P;
}

// Reachability by plain fixed-point iteration of p <- P p with p = 1 on goals
// and 0 on unsafe states, to machine precision.
inline Eigen::VectorXd iterate_reachability(const MrpProblem& prob, const Rsp& rsp,
                                            const PolicyParams& params) {
  const Eigen::MatrixXd P = dense_policy_matrix(prob.mdp, rsp, params);
  Eigen::VectorXd p = Eigen::VectorXd::Zero(P.rows());
  for (StateIndex g : prob.goal_states) p[static_cast<Eigen::Index>(g)] = 1.0;
  for (int it = 0; it < 200000; ++it) {
    Eigen::VectorXd next = P * p;
    for (StateIndex g : prob.goal_states) next[static_cast<Eigen::Index>(g)] = 1.0;
    for (StateIndex b : prob.unsafe_states) next[static_cast<Eigen::Index>(b)] = 0.0;
    const double d = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (d < 1e-15) break;
  }
  return p;
}

// Expected cost to termination by dense solve on the transient block.
inline Eigen::VectorXd dense_total_cost(const FiniteMdp& mdp, const Rsp& rsp, const PolicyParams& params,
                                        StateIndex term) {
  const Eigen::MatrixXd P = dense_policy_matrix(mdp, rsp, params);
  const auto n = P.rows();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    const Eigen::VectorXd mu = rsp.action_probs(params, x);
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (mdp.available(x, u)) g[static_cast<Eigen::Index>(x)] += mu[static_cast<Eigen::Index>(u)] * mdp.cost(x, u);
    }
  }
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - P;
  const auto t = static_cast<Eigen::Index>(term);
  M.row(t).setZero();
  M(t, t) = 1.0;
  g[t] = 0.0;
  return M.fullPivLu().solve(g);
}

} // namespace fx
