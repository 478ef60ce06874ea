#pragma once

#include "lstdac/mdp.hpp"
#include "lstdac/mrp_transform.hpp"

#include <Eigen/Dense>

#include <vector>

namespace lstdac {

/// mu(u|x) for every state, as a (states x actions) table.
Eigen::MatrixXd policy_table(const Rsp& rsp, const PolicyParams& params);

/// psi^i(x,u) tables, one (states x actions) matrix per parameter component.
std::vector<Eigen::MatrixXd> psi_tables(const Rsp& rsp, const PolicyParams& params);

struct StateValues {
  Eigen::VectorXd values;
  double residual = 0.0;
};

/**
 * Exact reachability probability of the goal set under the policy: solves
 * p(x) = sum_u mu(u|x) sum_y p(y|x,u) p(y) on safe non-goal states with p = 1
 * on goals and 0 on unsafe states. One unknown per safe non-goal state.
 * Throws NumericalError if the system is singular or the residual exceeds
 * 1e-10 (1 + |rhs|).
 */
StateValues rsp_reachability(const MrpProblem& problem, const Rsp& rsp, const PolicyParams& params);

struct MaxReachability {
  Eigen::VectorXd values;
  /// Greedy action per state, lowest index on ties.
  std::vector<ActionIndex> policy;
  std::size_t iterations = 0;
};

/// Value iteration for the optimal reachability probability; stops when the
/// sup-norm update falls below `tol` or after `max_iterations` sweeps.
MaxReachability max_reachability(const MrpProblem& problem, double tol = 1e-12,
                                 std::size_t max_iterations = 1000000);

/// True iff every state reaches the termination state with positive
/// probability under the policy (the transient block has spectral radius < 1).
bool policy_is_proper(const FiniteMdp& ssp_mdp, const Rsp& rsp, const PolicyParams& params);

/// Spectral radius of the policy's transition matrix restricted to the
/// non-terminal states, by power iteration to `tol`.
double transient_spectral_radius(const FiniteMdp& ssp_mdp, const Rsp& rsp,
                                 const PolicyParams& params, double tol = 1e-12,
                                 std::size_t max_iterations = 200000);

struct TotalCost {
  /// J(x) for every state, zero at the termination state.
  Eigen::VectorXd values;
  /// J(x0).
  double value = 0.0;
  double residual = 0.0;
};

/// Expected total cost until termination. Throws ImproperPolicyError when the
/// policy is not proper.
TotalCost expected_total_cost(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params);

/// Expected number of transitions from each state until termination.
StateValues expected_episode_length(const FiniteMdp& ssp_mdp, const Rsp& rsp,
                                    const PolicyParams& params);

struct QTable {
  /// (states x actions); zero on the termination state and unavailable pairs.
  Eigen::MatrixXd q;
  double residual = 0.0;
};

/// Solution of the Poisson equation Q = g + P_theta Q with Q(x*, .) = 0.
QTable q_values(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params);

struct StationaryDistribution {
  Eigen::VectorXd pi;
  /// eta(x,u) = pi(x) mu(u|x).
  Eigen::MatrixXd eta;
  double residual = 0.0;
};

/// True iff the restart-modified chain under the policy is irreducible.
bool restart_chain_irreducible(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params);

/// Stationary law of the restart-modified chain (termination state returns to
/// x0). States the chain never visits get zero mass. Throws NumericalError if
/// the chain has more than one closed class.
StationaryDistribution stationary_distribution(const SspProblem& ssp, const Rsp& rsp,
                                               const PolicyParams& params);

/// sum_{x,u} eta(x,u) f1(x,u) f2(x,u)
double weighted_inner_product(const Eigen::MatrixXd& f1, const Eigen::MatrixXd& f2,
                              const Eigen::MatrixXd& eta);

struct Projection {
  Eigen::VectorXd coefficients;
  /// sum_i r_i psi^i
  Eigen::MatrixXd projected;
  bool ridge_applied = false;
};

/// Weighted least-squares projection of q onto span{psi^i} under eta.
Projection project_q(const Eigen::MatrixXd& q, const std::vector<Eigen::MatrixXd>& psi,
                     const Eigen::MatrixXd& eta);

/// <Q, psi^i>_theta for each i, with eta from the restart-modified chain.
Eigen::VectorXd score_inner_products(const SspProblem& ssp, const Rsp& rsp,
                                     const PolicyParams& params);

/// Central finite differences of expected_total_cost in each theta component.
Eigen::VectorXd policy_gradient_fd(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& params,
                                   double h = 1e-5);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

} // namespace lstdac
