#include "lstdac/actor_critic.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lstdac {

double gamma_schedule(std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("gamma_schedule: k must be at least 1");
  return 1.0 / static_cast<double>(k);
}

double beta_schedule(std::uint64_t k, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("beta_schedule: c must be positive");
  const double kk = static_cast<double>(k < 2 ? 2 : k);
  return c / (kk * std::log(kk));
}

double gain_clip(const Eigen::VectorXd& r, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("gain_clip: radius must be positive");
  const double norm = r.norm();
  return norm > radius ? radius / norm : 1.0;
}

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in [0,1)");
  if (!(clip_radius > 0.0)) throw std::invalid_argument("clip radius D must be positive");
  if (!(actor_step > 0.0)) throw std::invalid_argument("actor step constant c must be positive");
  if (dim == 0) throw std::invalid_argument("parameter dimension must be positive");
  if (!(ridge_delta >= 0.0)) throw std::invalid_argument("ridge_delta must be nonnegative");
  if (max_episode_steps == 0) throw std::invalid_argument("max_episode_steps must be positive");
}

CriticState CriticState::zeros(std::size_t dim) {
  const auto n = static_cast<Eigen::Index>(dim);
  CriticState cs;
  cs.z = Eigen::VectorXd::Zero(n);
  cs.b = Eigen::VectorXd::Zero(n);
  cs.a = Eigen::MatrixXd::Zero(n, n);
  cs.r = Eigen::VectorXd::Zero(n);
  return cs;
}

bool CriticState::finite() const {
  return z.allFinite() && b.allFinite() && a.allFinite() && r.allFinite();
}

CriticState critic_step(const CriticState& cs, const Eigen::VectorXd& psi_now,
                        const Eigen::VectorXd& psi_next, double cost_now, const LearnerConfig& cfg) {
  const auto n = cs.z.size();
  if (psi_now.size() != n || psi_next.size() != n) {
    throw std::invalid_argument("critic_step: feature dimension mismatch");
  }
  CriticState out = cs;
  out.k = cs.k + 1;
  const double gamma = gamma_schedule(out.k);
  out.z = cfg.lambda * cs.z + psi_now;
  out.b = cs.b + gamma * (cost_now * out.z - cs.b);
  out.a = cs.a + gamma * (out.z * (psi_next - psi_now).transpose() - cs.a);

  const Eigen::MatrixXd lhs = out.a + cfg.ridge_delta * Eigen::MatrixXd::Identity(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(lhs);
  const Eigen::VectorXd r = -lu.solve(out.b);
  const double residual = (lhs * r + out.b).norm();
  if (lu.isInvertible() && r.allFinite() && residual <= 1e-8 * (1.0 + out.b.norm())) {
    out.r = r;
  } else {
    ++out.solve_failures;
  }
  return out;
}

PolicyParams actor_step(const PolicyParams& params, const Eigen::VectorXd& r,
                        const Eigen::VectorXd& psi_next, std::uint64_t k, const LearnerConfig& cfg) {
  if (r.size() != params.theta.size() || psi_next.size() != params.theta.size()) {
    throw std::invalid_argument("actor_step: dimension mismatch");
  }
  if (!cfg.actor_enabled || k <= cfg.actor_warmup_steps) return params;
  const double step = beta_schedule(k, cfg.actor_step) * gain_clip(r, cfg.clip_radius) * r.dot(psi_next);
  return PolicyParams(params.theta - step * psi_next);
}

TrainingHistory run_training(const SspProblem& ssp, const Rsp& rsp, const PolicyParams& initial,
                             const LearnerConfig& cfg, Rng& rng, const TrainingOptions& options,
                             const CheckpointHook& checkpoint) {
  cfg.validate();
  check_policy_dim(rsp, initial);
  if (cfg.dim != initial.dim()) throw std::invalid_argument("run_training: cfg.dim != theta dimension");
  if (!initial.finite()) throw std::invalid_argument("run_training: initial theta is not finite");
  const FiniteMdp& mdp = ssp.mdp;
  if (rsp.num_states() != mdp.num_states() || rsp.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("run_training: policy does not match the SSP model");
  }
  const StateIndex term = ssp.termination_state();
  const StateIndex x0 = mdp.initial_state();

  TrainingHistory history;
  history.final_params = initial;
  history.final_critic = CriticState::zeros(cfg.dim);
  if (options.total_steps == 0) return history;

  PolicyParams theta = initial;
  CriticState cs = CriticState::zeros(cfg.dim);
  const auto draw_action = [&](StateIndex x) {
    const Eigen::VectorXd probs = rsp.action_probs(theta, x);
    return rng.categorical({probs.data(), static_cast<std::size_t>(probs.size())});
  };

  StateIndex x = x0;
  ActionIndex u = draw_action(x);
  std::size_t ep_len = 0;
  double ep_cost = 0.0;
  std::size_t last_len = 0;
  double last_cost = 0.0;

  for (std::uint64_t step = 0; step < options.total_steps; ++step) {
    const double cost = mdp.cost(x, u);
    StateIndex next;
    if (x == term) {
      next = x0;
      if (cfg.trace_reset_on_restart) cs.z.setZero();
    } else {
      next = sample_transition(mdp, x, u, rng);
      ++ep_len;
      ep_cost += cost;
      if (next == term) {
        ++history.episodes;
        last_len = ep_len;
        last_cost = ep_cost;
        ep_len = 0;
        ep_cost = 0.0;
      } else if (ep_len >= cfg.max_episode_steps) {
        ++history.cap_events;
        next = x0;
        ep_len = 0;
        ep_cost = 0.0;
        if (cfg.trace_reset_on_restart) cs.z.setZero();
      }
    }
    const ActionIndex next_u = draw_action(next);
    const Eigen::VectorXd psi_now = rsp.psi(theta, x, u);
    const Eigen::VectorXd psi_next = rsp.psi(theta, next, next_u);

    const Eigen::VectorXd r_before = cs.r;
    cs = critic_step(cs, psi_now, psi_next, cost, cfg);
    if (!cs.finite()) {
      throw TrainingAborted("run_training: critic state became non-finite at step " +
                                std::to_string(cs.k),
                            theta, cs);
    }
    if (options.on_step) options.on_step(cs, psi_next);

    if (cs.k > cfg.actor_warmup_steps) {
      theta = actor_step(theta, cfg.actor_uses_updated_critic ? cs.r : r_before, psi_next, cs.k, cfg);
      if (!theta.finite()) {
        throw TrainingAborted("run_training: theta became non-finite at step " + std::to_string(cs.k),
                              theta, cs);
      }
      ++history.updates;
      const bool record = options.record_every && history.updates % options.record_every == 0;
      const bool check = options.checkpoint_every && checkpoint &&
                         history.updates % options.checkpoint_every == 0;
      if (record || check) {
        UpdateRecord rec;
        rec.step = cs.k;
        rec.update = history.updates;
        rec.theta = theta.theta;
        rec.r_norm = cs.r.norm();
        rec.episode = history.episodes;
        rec.episode_len = last_len;
        rec.episode_cost = last_cost;
        if (check) rec.exact_reach = checkpoint(theta, history.updates);
        history.records.push_back(std::move(rec));
      }
    }
    x = next;
    u = next_u;
  }
  history.final_params = theta;
  history.final_critic = cs;
  return history;
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

std::string history_csv_header(std::size_t dim) {
  std::string out = "step";
  for (std::size_t i = 0; i < dim; ++i) out += ",theta_" + std::to_string(i);
  out += ",r_norm,episode,episode_len,episode_cost,exact_reach_if_checkpointed\n";
  return out;
}

std::string history_csv_row(const UpdateRecord& record) {
  std::string out = std::to_string(record.step);
  for (Eigen::Index i = 0; i < record.theta.size(); ++i) out += "," + fmt17(record.theta[i]);
  out += "," + fmt17(record.r_norm);
  out += "," + std::to_string(record.episode);
  out += "," + std::to_string(record.episode_len);
  out += "," + fmt17(record.episode_cost);
  out += ",";
  if (record.exact_reach) out += fmt17(*record.exact_reach);
  out += "\n";
  return out;
}

} // namespace lstdac
