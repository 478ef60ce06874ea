#pragma once

#include "lstdac/mdp.hpp"
#include "lstdac/mrp_transform.hpp"

#include <Eigen/Dense>

#include <memory>

namespace lstdac {

/// Per-action feature vectors phi_u(x) and the availability mask F_u(x).
/// Implementations are immutable after construction.
class FeatureProvider {
public:
  virtual ~FeatureProvider() = default;

  virtual std::size_t dim() const = 0;
  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;

  virtual bool available(StateIndex x, ActionIndex u) const = 0;
  /// Only meaningful for available (x, u).
  virtual Eigen::VectorXd features(StateIndex x, ActionIndex u) const = 0;
};

/// Dense feature table with an explicit availability mask.
class TabularFeatures : public FeatureProvider {
public:
  TabularFeatures(std::size_t num_states, std::size_t num_actions, std::size_t dim);
  /// Mask copied from the MDP, features initialised to zero.
  TabularFeatures(const FiniteMdp& mdp, std::size_t dim);

  std::size_t dim() const override { return dim_; }
  std::size_t num_states() const override { return num_states_; }
  std::size_t num_actions() const override { return num_actions_; }

  bool available(StateIndex x, ActionIndex u) const override {
    return mask_[x * num_actions_ + u] != 0;
  }
  Eigen::VectorXd features(StateIndex x, ActionIndex u) const override {
    return table_.row(static_cast<Eigen::Index>(x * num_actions_ + u)).transpose();
  }

  void set_available(StateIndex x, ActionIndex u, bool on);
  void set_features(StateIndex x, ActionIndex u, const Eigen::VectorXd& phi);

private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::size_t dim_;
  std::vector<char> mask_;
  Eigen::MatrixXd table_;
};

/// Lifts a provider over MRP states to the SSP states of `ssp`. Safe states
/// keep their features; unsafe states and the termination state get every
/// action with identical (zero) features, so their score vectors vanish.
class SspFeatureAdapter : public FeatureProvider {
public:
  SspFeatureAdapter(std::shared_ptr<const FeatureProvider> base, const SspProblem& ssp);

  std::size_t dim() const override { return base_->dim(); }
  std::size_t num_states() const override { return origin_.size(); }
  std::size_t num_actions() const override { return base_->num_actions(); }

  bool available(StateIndex x, ActionIndex u) const override;
  Eigen::VectorXd features(StateIndex x, ActionIndex u) const override;

private:
  std::shared_ptr<const FeatureProvider> base_;
  std::vector<std::optional<StateIndex>> origin_;
  std::vector<char> passthrough_;
};

/**
 * Boltzmann policy with exponents linear in theta:
 *
 *   mu(u|x) = F_u(x) exp(theta . phi_u(x)) / sum_a F_a(x) exp(theta . phi_a(x))
 *
 * Exponents are shifted by their maximum before exponentiation. The score
 * vector has the closed form psi(x,u) = phi_u(x) - sum_a mu(a|x) phi_a(x).
 */
class BoltzmannPolicy : public Rsp {
public:
  explicit BoltzmannPolicy(std::shared_ptr<const FeatureProvider> provider);

  std::size_t dim() const override { return provider_->dim(); }
  std::size_t num_states() const override { return provider_->num_states(); }
  std::size_t num_actions() const override { return provider_->num_actions(); }

  Eigen::VectorXd action_probs(const PolicyParams& params, StateIndex x) const override;
  Eigen::VectorXd psi(const PolicyParams& params, StateIndex x, ActionIndex u) const override;

  /// ln mu(u|x); -infinity on unavailable actions.
  double log_prob(const PolicyParams& params, StateIndex x, ActionIndex u) const;

  const FeatureProvider& provider() const { return *provider_; }

private:
  std::shared_ptr<const FeatureProvider> provider_;
};

/// sum_u mu(u|x) psi(x,u); identically zero for a correct score function.
Eigen::VectorXd expected_policy_score(const Rsp& rsp, const PolicyParams& params, StateIndex x);

} // namespace lstdac
