#pragma once

#include <stdexcept>
#include <string>

namespace ags {

// Bad input: unknown ids, width mismatches, malformed files.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Caller broke an operation's precondition (re-query, reused tape).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Operation not allowed in the current state (terminated episode, closed session).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A distribution was requested over an empty support.
struct EmptySupport : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  NumericalError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (index " + std::to_string(index) + ")"), index(index) {}
  std::size_t index;
};

// Generator/bootstrap spec that cannot be satisfied by the pool.
struct InfeasibleSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Out-of-order session calls (observation without suggestion, mismatched parcel).
struct SequencingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ags
