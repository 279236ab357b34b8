#pragma once

#include <stdexcept>
#include <string>

namespace tweezer {

/// Input outside an operation's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Physics regime the model does not cover (e.g. blue-detuned trap light).
class UnsupportedRegime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration; the CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical procedure failed (fit, calibration, estimation); exit code 3.
class ComputationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tweezer
