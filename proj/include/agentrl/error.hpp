#pragma once

#include <stdexcept>
#include <string>

namespace agentrl {

// Bad configuration value, unknown key or unsatisfiable environment size.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing data file (datasets, checkpoints, logs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A token id that does not belong to the vocabulary or alphabet in use.
class InvalidTokenError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke an operation precondition (illegal action id, reflecting on a
// successful trial, out-of-order trials, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace agentrl
