#include "lstdac/boltzmann.hpp"

#include "lstdac/errors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lstdac {

TabularFeatures::TabularFeatures(std::size_t num_states, std::size_t num_actions, std::size_t dim)
    : num_states_(num_states),
      num_actions_(num_actions),
      dim_(dim),
      mask_(num_states * num_actions, 0),
      table_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_states * num_actions),
                                   static_cast<Eigen::Index>(dim))) {}

TabularFeatures::TabularFeatures(const FiniteMdp& mdp, std::size_t dim)
    : TabularFeatures(mdp.num_states(), mdp.num_actions(), dim) {
  for (StateIndex x = 0; x < num_states_; ++x) {
    for (ActionIndex u = 0; u < num_actions_; ++u) mask_[x * num_actions_ + u] = mdp.available(x, u);
  }
}

void TabularFeatures::set_available(StateIndex x, ActionIndex u, bool on) {
  if (x >= num_states_ || u >= num_actions_) throw std::out_of_range("TabularFeatures: index");
  mask_[x * num_actions_ + u] = on ? 1 : 0;
}

void TabularFeatures::set_features(StateIndex x, ActionIndex u, const Eigen::VectorXd& phi) {
  if (x >= num_states_ || u >= num_actions_) throw std::out_of_range("TabularFeatures: index");
  if (static_cast<std::size_t>(phi.size()) != dim_) {
    throw std::invalid_argument("TabularFeatures: feature dimension mismatch");
  }
  if (!phi.allFinite()) throw std::invalid_argument("TabularFeatures: non-finite feature");
  table_.row(static_cast<Eigen::Index>(x * num_actions_ + u)) = phi.transpose();
}

SspFeatureAdapter::SspFeatureAdapter(std::shared_ptr<const FeatureProvider> base,
                                     const SspProblem& ssp)
    : base_(std::move(base)), origin_(ssp.origin_map), passthrough_(ssp.origin_map.size(), 0) {
  if (!base_) throw std::invalid_argument("SspFeatureAdapter: null base provider");
  if (base_->num_actions() != ssp.mdp.num_actions()) {
    throw std::invalid_argument("SspFeatureAdapter: action count mismatch");
  }
  for (StateIndex s = 0; s < origin_.size(); ++s) {
    if (origin_[s] && *origin_[s] >= base_->num_states()) {
      throw std::invalid_argument("SspFeatureAdapter: origin index out of base range");
    }
    passthrough_[s] = origin_[s].has_value();
  }
  for (StateIndex s : ssp.unsafe_states) passthrough_[s] = 0;
}

bool SspFeatureAdapter::available(StateIndex x, ActionIndex u) const {
  return passthrough_[x] ? base_->available(*origin_[x], u) : true;
}

Eigen::VectorXd SspFeatureAdapter::features(StateIndex x, ActionIndex u) const {
  if (passthrough_[x]) return base_->features(*origin_[x], u);
  return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(base_->dim()));
}

BoltzmannPolicy::BoltzmannPolicy(std::shared_ptr<const FeatureProvider> provider)
    : provider_(std::move(provider)) {
  if (!provider_) throw std::invalid_argument("BoltzmannPolicy: null feature provider");
}

Eigen::VectorXd BoltzmannPolicy::action_probs(const PolicyParams& params, StateIndex x) const {
  check_policy_dim(*this, params);
  const std::size_t na = provider_->num_actions();
  Eigen::VectorXd expo = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(na),
                                                   -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (ActionIndex u = 0; u < na; ++u) {
    if (!provider_->available(x, u)) continue;
    any = true;
    const double h = params.theta.dot(provider_->features(x, u));
    if (!std::isfinite(h)) {
      throw NumericalError("action_probs: non-finite exponent at state " + std::to_string(x));
    }
    expo[static_cast<Eigen::Index>(u)] = h;
    top = std::max(top, h);
  }
  if (!any) {
    throw std::invalid_argument("action_probs: no available action at state " + std::to_string(x));
  }
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(na));
  double total = 0.0;
  for (ActionIndex u = 0; u < na; ++u) {
    if (!provider_->available(x, u)) continue;
    const auto i = static_cast<Eigen::Index>(u);
    probs[i] = std::exp(expo[i] - top);
    total += probs[i];
  }
  return probs / total;
}

Eigen::VectorXd BoltzmannPolicy::psi(const PolicyParams& params, StateIndex x,
                                     ActionIndex u) const {
  const auto n = static_cast<Eigen::Index>(provider_->dim());
  if (!provider_->available(x, u)) {
    check_policy_dim(*this, params);
    return Eigen::VectorXd::Zero(n);
  }
  const Eigen::VectorXd probs = action_probs(params, x);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (ActionIndex a = 0; a < provider_->num_actions(); ++a) {
    const double p = probs[static_cast<Eigen::Index>(a)];
    if (p > 0.0) mean += p * provider_->features(x, a);
  }
  return provider_->features(x, u) - mean;
}

double BoltzmannPolicy::log_prob(const PolicyParams& params, StateIndex x, ActionIndex u) const {
  check_policy_dim(*this, params);
  if (!provider_->available(x, u)) return -std::numeric_limits<double>::infinity();
  double top = -std::numeric_limits<double>::infinity();
  for (ActionIndex a = 0; a < provider_->num_actions(); ++a) {
    if (provider_->available(x, a)) top = std::max(top, params.theta.dot(provider_->features(x, a)));
  }
  double total = 0.0;
  for (ActionIndex a = 0; a < provider_->num_actions(); ++a) {
    if (provider_->available(x, a)) total += std::exp(params.theta.dot(provider_->features(x, a)) - top);
  }
  return params.theta.dot(provider_->features(x, u)) - top - std::log(total);
}

Eigen::VectorXd expected_policy_score(const Rsp& rsp, const PolicyParams& params, StateIndex x) {
  const Eigen::VectorXd probs = rsp.action_probs(params, x);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rsp.dim()));
  for (ActionIndex u = 0; u < rsp.num_actions(); ++u) {
    const double p = probs[static_cast<Eigen::Index>(u)];
    if (p > 0.0) total += p * rsp.psi(params, x, u);
  }
  return total;
}

} // namespace lstdac
