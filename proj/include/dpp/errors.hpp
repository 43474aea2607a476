#pragma once

#include <stdexcept>

namespace dpp {

/// Arguments that violate an operation's contract (shape mismatch, bad probabilities, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration that cannot be run (unknown ids, out-of-domain hyperparameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unregularized least-squares system without a unique solution.
class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Run records that cannot be aggregated checkpoint-by-checkpoint.
class AggregationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dpp
