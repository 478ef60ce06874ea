#pragma once

#include <stdexcept>
#include <string>

namespace lstdac {

/// A linear system, factorization, or iteration failed to produce a
/// trustworthy answer (singular system, residual too large, non-finite value).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The policy under evaluation does not reach the termination state with
/// probability one from every state.
class ImproperPolicyError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Input data violates a documented invariant (malformed grid, invalid MDP).
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

} // namespace lstdac
