#pragma once
#include <stdexcept>
#include <string>

namespace fedsim {

// Invalid configuration or precondition violation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterate became non-finite or exceeded the divergence radius.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A worker exceeded its declared local computation budget.
class BudgetViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fedsim
