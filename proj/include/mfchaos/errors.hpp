#pragma once

#include <stdexcept>
#include <string>

namespace mfchaos {

/// A hypothesis of the contraction theory is violated (e.g. eta >= c).
/// The CLI maps this to exit code 2.
class HypothesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values, failed quadrature or a diverging simulation.
/// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mfchaos
