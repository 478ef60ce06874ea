#include "lstdac/oracles.hpp"

#include "lstdac/errors.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <deque>
#include <stdexcept>

namespace lstdac {

namespace {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

void check_sizes(const FiniteMdp& mdp, const Rsp& rsp, const PolicyParams& params) {
  check_policy_dim(rsp, params);
  if (rsp.num_states() != mdp.num_states() || rsp.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("policy and MDP disagree on state/action counts");
  }
}

/// Row x of the policy's state-to-state chain, accumulated into `out`.
template <typename Fn>
void for_each_successor(const FiniteMdp& mdp, const Eigen::MatrixXd& mu, StateIndex x, Fn&& fn) {
  for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
    const double pu = mu(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u));
    if (pu <= 0.0 || !mdp.available(x, u)) continue;
    for (const auto& t : mdp.row(x, u)) fn(t.next, pu * t.prob);
  }
}

/// States that can reach `target` along edges of positive probability under mu.
std::vector<char> reaches(const FiniteMdp& mdp, const Eigen::MatrixXd& mu,
                          const std::vector<char>& target) {
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<StateIndex>> preds(n);
  for (StateIndex x = 0; x < n; ++x) {
    for_each_successor(mdp, mu, x, [&](StateIndex j, double p) {
      if (p > 0.0 && j != x) preds[j].push_back(x);
    });
  }
  std::vector<char> seen = target;
  std::deque<StateIndex> queue;
  for (StateIndex x = 0; x < n; ++x) {
    if (seen[x]) queue.push_back(x);
  }
  while (!queue.empty()) {
    const StateIndex j = queue.front();
    queue.pop_front();
    for (StateIndex x : preds[j]) {
      if (!seen[x]) {
        seen[x] = 1;
        queue.push_back(x);
      }
    }
  }
  return seen;
}

/**
 * Solves v = r + P v on the `unknown` states, with v fixed to `fixed` elsewhere,
 * where P is the chain induced by mu. Returns the full vector.
 */
StateValues solve_absorbing(const FiniteMdp& mdp, const Eigen::MatrixXd& mu,
                            const std::vector<char>& unknown, const Eigen::VectorXd& fixed,
                            const Eigen::VectorXd& reward, const char* what) {
  const std::size_t n = mdp.num_states();
  std::vector<Eigen::Index> slot(n, -1);
  Eigen::Index m = 0;
  for (StateIndex x = 0; x < n; ++x) {
    if (unknown[x]) slot[x] = m++;
  }
  StateValues out;
  out.values = fixed;
  if (m == 0) return out;

  std::vector<Triplet> triplets;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (StateIndex x = 0; x < n; ++x) {
    if (!unknown[x]) continue;
    const Eigen::Index i = slot[x];
    triplets.emplace_back(i, i, 1.0);
    rhs[i] = reward[static_cast<Eigen::Index>(x)];
    for_each_successor(mdp, mu, x, [&](StateIndex j, double p) {
      if (unknown[j]) {
        triplets.emplace_back(i, slot[j], -p);
      } else {
        rhs[i] += p * fixed[static_cast<Eigen::Index>(j)];
      }
    });
  }
  SparseMatrix a(m, m);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) {
    throw NumericalError(std::string(what) + ": singular linear system");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw NumericalError(std::string(what) + ": linear solve failed");
  }
  out.residual = (a * sol - rhs).lpNorm<Eigen::Infinity>();
  if (out.residual > 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) {
    throw NumericalError(std::string(what) + ": residual " + std::to_string(out.residual) +
                         " exceeds tolerance");
  }
  for (StateIndex x = 0; x < n; ++x) {
    if (unknown[x]) out.values[static_cast<Eigen::Index>(x)] = sol[slot[x]];
  }
  return out;
}

std::vector<char> membership(std::size_t n, const std::vector<StateIndex>& states) {
  std::vector<char> in(n, 0);
  for (StateIndex x : states) in[x] = 1;
  return in;
}

void require_proper(const FiniteMdp& mdp, const Eigen::MatrixXd& mu, const char* what) {
  const auto term = mdp.termination_state();
  if (!term) throw std::invalid_argument(std::string(what) + ": MDP has no termination state");
  std::vector<char> target(mdp.num_states(), 0);
  target[*term] = 1;
  const auto ok = reaches(mdp, mu, target);
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    if (!ok[x]) {
      throw ImproperPolicyError(std::string(what) + ": policy is improper (state " +
                                std::to_string(x) + " never terminates)");
    }
  }
}

} // namespace

Eigen::MatrixXd policy_table(const Rsp& rsp, const PolicyParams& params) {
  Eigen::MatrixXd mu(static_cast<Eigen::Index>(rsp.num_states()),
                     static_cast<Eigen::Index>(rsp.num_actions()));
  for (StateIndex x = 0; x < rsp.num_states(); ++x) {
    mu.row(static_cast<Eigen::Index>(x)) = rsp.action_probs(params, x).transpose();
  }
  return mu;
}

std::vector<Eigen::MatrixXd> psi_tables(const Rsp& rsp, const PolicyParams& params) {
  const auto ns = static_cast<Eigen::Index>(rsp.num_states());
  const auto na = static_cast<Eigen::Index>(rsp.num_actions());
  std::vector<Eigen::MatrixXd> out(rsp.dim(), Eigen::MatrixXd::Zero(ns, na));
  for (StateIndex x = 0; x < rsp.num_states(); ++x) {
    for (ActionIndex u = 0; u < rsp.num_actions(); ++u) {
      const Eigen::VectorXd p = rsp.psi(params, x, u);
      for (std::size_t i = 0; i < rsp.dim(); ++i) {
        out[i](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)) =
            p[static_cast<Eigen::Index>(i)];
      }
    }
  }
  return out;
}

StateValues rsp_reachability(const MrpProblem& problem, const Rsp& rsp, const PolicyParams& params) {
  const FiniteMdp& mdp = problem.mdp;
  check_sizes(mdp, rsp, params);
  const std::size_t n = mdp.num_states();
  const auto goal = membership(n, problem.goal_states);
  const auto unsafe = membership(n, problem.unsafe_states);
  std::vector<char> unknown(n);
  Eigen::VectorXd fixed = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (StateIndex x = 0; x < n; ++x) {
    unknown[x] = !goal[x] && !unsafe[x];
    if (goal[x]) fixed[static_cast<Eigen::Index>(x)] = 1.0;
  }
  return solve_absorbing(mdp, policy_table(rsp, params), unknown, fixed,
                         Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), "rsp_reachability");
}

MaxReachability max_reachability(const MrpProblem& problem, double tol,
                                 std::size_t max_iterations) {
  const FiniteMdp& mdp = problem.mdp;
  const std::size_t n = mdp.num_states();
  const auto goal = membership(n, problem.goal_states);
  const auto unsafe = membership(n, problem.unsafe_states);

  MaxReachability out;
  out.values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  out.policy.assign(n, 0);
  for (StateIndex x : problem.goal_states) out.values[static_cast<Eigen::Index>(x)] = 1.0;

  const auto backup = [&](const Eigen::VectorXd& v, StateIndex x, ActionIndex& arg) {
    double best = -1.0;
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      double q = 0.0;
      for (const auto& t : mdp.row(x, u)) q += t.prob * v[static_cast<Eigen::Index>(t.next)];
      if (q > best) {
        best = q;
        arg = u;
      }
    }
    return best;
  };

  Eigen::VectorXd next = out.values;
  while (out.iterations < max_iterations) {
    double delta = 0.0;
    for (StateIndex x = 0; x < n; ++x) {
      if (goal[x] || unsafe[x]) continue;
      ActionIndex arg = 0;
      const double v = backup(out.values, x, arg);
      delta = std::max(delta, std::abs(v - out.values[static_cast<Eigen::Index>(x)]));
      next[static_cast<Eigen::Index>(x)] = v;
    }
    out.values.swap(next);
    ++out.iterations;
    if (delta < tol) break;
  }
  for (StateIndex x = 0; x < n; ++x) {
    if (goal[x] || unsafe[x]) continue;
    backup(out.values, x, out.policy[x]);
  }
  return out;
}

bool policy_is_proper(const FiniteMdp& ssp_mdp, const Rsp& rsp, const PolicyParams& params) {
  check_sizes(ssp_mdp, rsp, params);
  try {
    require_proper(ssp_mdp, policy_table(rsp, params), "policy_is_proper");
  } catch (const ImproperPolicyError&) {
    return false;
  }
  return true;
}

double transient_spectral_radius(const FiniteMdp& ssp_mdp, const Rsp& rsp,
                                 const PolicyParams& params, double tol,
                                 std::size_t max_iterations) {
  check_sizes(ssp_mdp, rsp, params);
  const auto term = ssp_mdp.termination_state();
  if (!term) throw std::invalid_argument("transient_spectral_radius: no termination state");
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  const std::size_t n = ssp_mdp.num_states();
  std::vector<Triplet> triplets;
  for (StateIndex x = 0; x < n; ++x) {
    if (x == *term) continue;
    for_each_successor(ssp_mdp, mu, x, [&](StateIndex j, double p) {
      if (j != *term) triplets.emplace_back(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j), p);
    });
  }
  SparseMatrix q(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  q.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  v[static_cast<Eigen::Index>(*term)] = 0.0;
  double estimate = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd w = q * v;
    const double norm = w.lpNorm<Eigen::Infinity>();
    if (norm == 0.0) return 0.0;
    const double next = norm / v.lpNorm<Eigen::Infinity>();
    v = w / norm;
    if (it > 0 && std::abs(next - estimate) < tol) return next;
    estimate = next;
  }
  return estimate;
}

TotalCost expected_total_cost(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params) {
  const FiniteMdp& mdp = ssp.mdp;
  check_sizes(mdp, rsp, params);
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  require_proper(mdp, mu, "expected_total_cost");
  const std::size_t n = mdp.num_states();
  const StateIndex term = ssp.termination_state();
  std::vector<char> unknown(n, 1);
  unknown[term] = 0;
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (StateIndex x = 0; x < n; ++x) {
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      const double p = mu(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u));
      if (p > 0.0) reward[static_cast<Eigen::Index>(x)] += p * mdp.cost(x, u);
    }
  }
  const StateValues sol = solve_absorbing(mdp, mu, unknown,
                                          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
                                          reward, "expected_total_cost");
  return {sol.values, sol.values[static_cast<Eigen::Index>(mdp.initial_state())], sol.residual};
}

StateValues expected_episode_length(const FiniteMdp& ssp_mdp, const Rsp& rsp,
                                    const PolicyParams& params) {
  check_sizes(ssp_mdp, rsp, params);
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  require_proper(ssp_mdp, mu, "expected_episode_length");
  const std::size_t n = ssp_mdp.num_states();
  std::vector<char> unknown(n, 1);
  unknown[*ssp_mdp.termination_state()] = 0;
  Eigen::VectorXd reward = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  return solve_absorbing(ssp_mdp, mu, unknown, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)),
                         reward, "expected_episode_length");
}

QTable q_values(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params) {
  const FiniteMdp& mdp = ssp.mdp;
  const TotalCost cost = expected_total_cost(ssp, rsp, params);
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  const auto ns = static_cast<Eigen::Index>(mdp.num_states());
  const auto na = static_cast<Eigen::Index>(mdp.num_actions());
  const StateIndex term = ssp.termination_state();

  QTable out;
  out.q = Eigen::MatrixXd::Zero(ns, na);
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    if (x == term) continue;
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      double q = mdp.cost(x, u);
      for (const auto& t : mdp.row(x, u)) q += t.prob * cost.values[static_cast<Eigen::Index>(t.next)];
      out.q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)) = q;
    }
  }
  // Poisson residual, measured against Q itself rather than J.
  const Eigen::VectorXd v = (mu.array() * out.q.array()).rowwise().sum();
  double scale = 1.0;
  for (StateIndex x = 0; x < mdp.num_states(); ++x) {
    if (x == term) continue;
    for (ActionIndex u = 0; u < mdp.num_actions(); ++u) {
      if (!mdp.available(x, u)) continue;
      double rhs = mdp.cost(x, u);
      for (const auto& t : mdp.row(x, u)) rhs += t.prob * v[static_cast<Eigen::Index>(t.next)];
      out.residual = std::max(
          out.residual, std::abs(out.q(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(u)) - rhs));
      scale = std::max(scale, 1.0 + std::abs(rhs));
    }
  }
  if (out.residual > 1e-10 * scale) {
    throw NumericalError("q_values: Poisson residual " + std::to_string(out.residual));
  }
  return out;
}

namespace {

// Transition matrix of the restart-modified chain under mu, as a sparse matrix.
SparseMatrix restart_chain(const SspProblem& ssp, const Eigen::MatrixXd& mu) {
  const FiniteMdp restart = apply_restart_modification(ssp);
  const auto n = static_cast<Eigen::Index>(restart.num_states());
  std::vector<Triplet> triplets;
  for (StateIndex x = 0; x < restart.num_states(); ++x) {
    for_each_successor(restart, mu, x, [&](StateIndex j, double p) {
      triplets.emplace_back(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(j), p);
    });
  }
  SparseMatrix p(n, n);
  p.setFromTriplets(triplets.begin(), triplets.end());
  return p;
}

std::vector<char> bfs(const SparseMatrix& p, StateIndex start, bool forward) {
  const auto n = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<StateIndex>> adj(n);
  for (Eigen::Index k = 0; k < p.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p, k); it; ++it) {
      if (it.value() <= 0.0) continue;
      const auto from = static_cast<StateIndex>(it.row());
      const auto to = static_cast<StateIndex>(it.col());
      if (forward) {
        adj[from].push_back(to);
      } else {
        adj[to].push_back(from);
      }
    }
  }
  std::vector<char> seen(n, 0);
  std::deque<StateIndex> queue{start};
  seen[start] = 1;
  while (!queue.empty()) {
    const StateIndex x = queue.front();
    queue.pop_front();
    for (StateIndex y : adj[x]) {
      if (!seen[y]) {
        seen[y] = 1;
        queue.push_back(y);
      }
    }
  }
  return seen;
}

} // namespace

bool restart_chain_irreducible(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params) {
  check_sizes(ssp.mdp, rsp, params);
  const SparseMatrix p = restart_chain(ssp, policy_table(rsp, params));
  const StateIndex x0 = ssp.mdp.initial_state();
  const auto fwd = bfs(p, x0, true);
  const auto bwd = bfs(p, x0, false);
  for (std::size_t x = 0; x < fwd.size(); ++x) {
    if (!fwd[x] || !bwd[x]) return false;
  }
  return true;
}

StationaryDistribution stationary_distribution(const SspProblem& ssp, const Rsp& rsp,
                                               const PolicyParams& params) {
  check_sizes(ssp.mdp, rsp, params);
  const Eigen::MatrixXd mu = policy_table(rsp, params);
  const SparseMatrix p = restart_chain(ssp, mu);
  const auto n = p.rows();
  const StateIndex x0 = ssp.mdp.initial_state();

  const auto back = bfs(p, x0, false);
  for (std::size_t x = 0; x < back.size(); ++x) {
    if (!back[x]) {
      throw NumericalError("stationary_distribution: state " + std::to_string(x) +
                           " never returns to the initial state (reducible chain)");
    }
  }

  // (P' - I) pi = 0 with the equation for x0 replaced by sum(pi) = 1.
  const auto r = static_cast<Eigen::Index>(x0);
  std::vector<Triplet> triplets;
  for (Eigen::Index k = 0; k < p.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(p, k); it; ++it) {
      if (it.col() != r) triplets.emplace_back(it.col(), it.row(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != r) triplets.emplace_back(i, i, -1.0);
    triplets.emplace_back(r, i, 1.0);
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[r] = 1.0;
  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericalError("stationary_distribution: singular system");

  StationaryDistribution out;
  out.pi = lu.solve(rhs);
  if (!out.pi.allFinite()) throw NumericalError("stationary_distribution: solve failed");
  const Eigen::VectorXd balance = (p.transpose() * out.pi - out.pi);
  out.residual = std::max(balance.lpNorm<Eigen::Infinity>(), std::abs(out.pi.sum() - 1.0));
  if (out.residual > 1e-10) {
    throw NumericalError("stationary_distribution: residual " + std::to_string(out.residual));
  }
  out.eta = mu.array().colwise() * out.pi.array();
  return out;
}

double weighted_inner_product(const Eigen::MatrixXd& f1, const Eigen::MatrixXd& f2,
                              const Eigen::MatrixXd& eta) {
  if (f1.rows() != eta.rows() || f1.cols() != eta.cols() || f2.rows() != eta.rows() ||
      f2.cols() != eta.cols()) {
    throw std::invalid_argument("weighted_inner_product: table shape mismatch");
  }
  return (eta.array() * f1.array() * f2.array()).sum();
}

Projection project_q(const Eigen::MatrixXd& q, const std::vector<Eigen::MatrixXd>& psi,
                     const Eigen::MatrixXd& eta) {
  const auto n = static_cast<Eigen::Index>(psi.size());
  if (n == 0) throw std::invalid_argument("project_q: no features");
  Eigen::MatrixXd gram(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs[i] = weighted_inner_product(q, psi[static_cast<std::size_t>(i)], eta);
    for (Eigen::Index j = 0; j <= i; ++j) {
      gram(i, j) = gram(j, i) =
          weighted_inner_product(psi[static_cast<std::size_t>(i)], psi[static_cast<std::size_t>(j)], eta);
    }
  }
  if (gram.cwiseAbs().maxCoeff() == 0.0) {
    throw std::invalid_argument("project_q: features carry no mass under eta");
  }
  Projection out;
  Eigen::FullPivLU<Eigen::MatrixXd> rank_check(gram);
  if (rank_check.rank() < n) {
    gram += 1e-10 * Eigen::MatrixXd::Identity(n, n);
    out.ridge_applied = true;
  }
  out.coefficients = gram.ldlt().solve(rhs);
  out.projected = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    out.projected += out.coefficients[i] * psi[static_cast<std::size_t>(i)];
  }
  return out;
}

Eigen::VectorXd score_inner_products(const SspProblem& ssp, const Rsp& rsp,
                                     const PolicyParams& params) {
  const QTable q = q_values(ssp, rsp, params);
  const StationaryDistribution dist = stationary_distribution(ssp, rsp, params);
  const auto psi = psi_tables(rsp, params);
  Eigen::VectorXd out(static_cast<Eigen::Index>(psi.size()));
  for (std::size_t i = 0; i < psi.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = weighted_inner_product(q.q, psi[i], dist.eta);
  }
  return out;
}

Eigen::VectorXd policy_gradient_fd(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params,
                                   double h) {
  if (!(h > 0.0)) throw std::invalid_argument("policy_gradient_fd: step must be positive");
  check_policy_dim(rsp, params);
  Eigen::VectorXd grad(static_cast<Eigen::Index>(params.dim()));
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    PolicyParams plus = params;
    PolicyParams minus = params;
    plus.theta[i] += h;
    minus.theta[i] -= h;
    grad[i] = (expected_total_cost(ssp, rsp, plus).value -
               expected_total_cost(ssp, rsp, minus).value) / (2.0 * h);
  }
  return grad;
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double denom = a.norm() * b.norm();
  if (denom == 0.0) return 0.0;
  return a.dot(b) / denom;
}

} // namespace lstdac
