#pragma once

#include <stdexcept>
#include <string>

namespace dlab {

// Error taxonomy shared by all modules. Every failure mode that callers can
// react to gets its own type; anything else is a plain logic_error.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error("ConfigError: " + what) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error("DomainError: " + what) {}
};

struct ModelError : std::runtime_error {
  explicit ModelError(const std::string& what) : std::runtime_error("ModelError: " + what) {}
};

struct SingularityError : std::runtime_error {
  double min_eigenvalue;
  SingularityError(const std::string& what, double min_eig)
      : std::runtime_error("SingularityError: " + what + " (min eigenvalue " +
                           std::to_string(min_eig) + ")"),
        min_eigenvalue(min_eig) {}
};

struct ConvergenceError : std::runtime_error {
  double residual;
  ConvergenceError(const std::string& what, double res)
      : std::runtime_error("ConvergenceError: " + what + " (residual " + std::to_string(res) + ")"),
        residual(res) {}
};

struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& what)
      : std::runtime_error("CapabilityError: " + what) {}
};

struct HorizonError : std::runtime_error {
  double last_distance;
  HorizonError(const std::string& what, double last)
      : std::runtime_error("HorizonError: " + what + " (last distance " + std::to_string(last) + ")"),
        last_distance(last) {}
};

}  // namespace dlab
