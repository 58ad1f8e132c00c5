#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scerm {

struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when Newton fails to reach tolerance; keeps the decrement history.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

}  // namespace scerm
