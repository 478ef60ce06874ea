#pragma once

#include "lstdac/errors.hpp"
#include "lstdac/mdp.hpp"
#include "lstdac/mrp_transform.hpp"
#include "lstdac/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace lstdac {

/// Critic step size 1/k, k >= 1.
double gamma_schedule(std::uint64_t k);

/// Actor step size c / (k ln k) for k >= 2; k in {0, 1} use the k = 2 value.
double beta_schedule(std::uint64_t k, double c);

/// D / |r| when |r| > D, else 1.
double gain_clip(const Eigen::VectorXd& r, double radius);

struct LearnerConfig {
  /// Trace decay, in [0, 1).
  double lambda = 0.9;
  /// Gain clip radius D.
  double clip_radius = 5.0;
  /// Actor schedule constant c.
  double actor_step = 0.05;
  std::size_t dim = 2;
  bool trace_reset_on_restart = false;
  /// Steps during which the actor is frozen while A fills in.
  std::size_t actor_warmup_steps = 100;
  /// Ridge added to A before solving for r.
  double ridge_delta = 1e-6;
  std::size_t max_episode_steps = 100000;
  /// false freezes the actor (beta = 0); the critic still runs.
  bool actor_enabled = true;
  /// Use the critic solution after the current critic step in the actor
  /// update instead of the one before it.
  bool actor_uses_updated_critic = false;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Running LSTD statistics. All zero at k = 0.
struct CriticState {
  Eigen::VectorXd z;
  Eigen::VectorXd b;
  Eigen::MatrixXd a;
  Eigen::VectorXd r;
  std::uint64_t k = 0;
  /// Steps where (A + delta I) r = -b could not be solved; r was carried over.
  std::uint64_t solve_failures = 0;

  static CriticState zeros(std::size_t dim);
  bool finite() const;
};

/**
 * One LSTD(lambda) critic step with gamma = 1/(k+1):
 *
 *   z' = lambda z + psi_now
 *   b' = b + gamma (g z' - b)
 *   A' = A + gamma (z' (psi_next - psi_now)^T - A)
 *   r' = -(A' + delta I)^{-1} b'
 *
 * The trace is advanced before it enters b and A. r' comes from a pivoted LU
 * solve with a residual check; on failure r is kept and solve_failures bumps.
 */
CriticState critic_step(const CriticState& cs, const Eigen::VectorXd& psi_now,
                        const Eigen::VectorXd& psi_next, double cost_now, const LearnerConfig& cfg);

/// theta' = theta - beta(k) Gamma(r) (r . psi_next) psi_next; beta is zero
/// while the actor is disabled or k <= actor_warmup_steps.
PolicyParams actor_step(const PolicyParams& params, const Eigen::VectorXd& r,
                        const Eigen::VectorXd& psi_next, std::uint64_t k, const LearnerConfig& cfg);

struct UpdateRecord {
  /// Global step counter k after the update.
  std::uint64_t step = 0;
  /// 1-based index among actor updates.
  std::uint64_t update = 0;
  Eigen::VectorXd theta;
  double r_norm = 0.0;
  /// Episodes completed so far.
  std::uint64_t episode = 0;
  /// Length and cost of the most recently completed episode.
  std::size_t episode_len = 0;
  double episode_cost = 0.0;
  std::optional<double> exact_reach;
};

struct TrainingHistory {
  std::vector<UpdateRecord> records;
  PolicyParams final_params;
  CriticState final_critic;
  std::uint64_t updates = 0;
  std::uint64_t episodes = 0;
  std::uint64_t cap_events = 0;
};

struct TrainingOptions {
  std::uint64_t total_steps = 0;
  /// Keep every n-th actor update in the history (0 keeps none).
  std::uint64_t record_every = 1;
  /// Call the checkpoint hook every n-th actor update (0 disables).
  std::uint64_t checkpoint_every = 0;
  /// Observes every step: the averaged-direction diagnostics hook in here.
  std::function<void(const CriticState&, const Eigen::VectorXd& psi_next)> on_step;
};

/// Receives the parameters at a checkpoint and may return an exact
/// reachability value to store with the record.
using CheckpointHook = std::function<std::optional<double>(const PolicyParams&, std::uint64_t update)>;

/// Thrown when theta or the critic state becomes non-finite.
class TrainingAborted : public NumericalError {
public:
  TrainingAborted(const std::string& what, PolicyParams params, CriticState critic)
      : NumericalError(what), params_(std::move(params)), critic_(std::move(critic)) {}

  const PolicyParams& params() const { return params_; }
  const CriticState& critic() const { return critic_; }

private:
  PolicyParams params_;
  CriticState critic_;
};

/**
 * LSTD actor-critic on the restart-modified chain of `ssp`: on entering the
 * termination state the next state is x0 at no cost. Each step samples the
 * successor and the next action under the current theta, advances the critic
 * once and the actor once. The step counter is global across episodes.
 */
TrainingHistory run_training(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& initial,
                             const LearnerConfig& cfg, Rng& rng, const TrainingOptions& options,
                             const CheckpointHook& checkpoint = {});

/// History CSV: step, theta_0..theta_{n-1}, r_norm, episode, episode_len,
/// episode_cost, exact_reach_if_checkpointed. Reals use 17 significant digits.
std::string history_csv_header(std::size_t dim);
std::string history_csv_row(const UpdateRecord& record);

} // namespace lstdac
