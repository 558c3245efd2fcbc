#pragma once

#include <stdexcept>
#include <string>

namespace stc {

/// Matrix shapes do not agree with what an operation requires.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation (non-finite
/// entries, non-positive interval, indefinite weight, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The Riccati equation has no stabilizing solution for the given data.
class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solve succeeded formally but the result is too ill-conditioned to trust.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed experiment configuration or reference document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The peer on a policy bridge violated the message protocol or timed out.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stc
