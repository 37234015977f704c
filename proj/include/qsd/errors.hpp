#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsd {

/// Base for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model was defined or queried inconsistently (negative rate, state outside E, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped before reaching its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, std::size_t iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

/// Conditioning on survival is impossible: no surviving mass or no surviving replica.
class DegenerateConditioning : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration document; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsd
