#pragma once

#include <stdexcept>
#include <string>

namespace mlabs {

/// Malformed caller input: bad shapes, out-of-domain values, unreadable data.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Invalid hyperparameters, schedules, or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Operation requested on an object in the wrong state (e.g. an empty chain).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// A proposal could not be formed (constant column, repeated knot ties).
/// The sampler turns this into a skipped, rejected move.
class ProposalError : public std::runtime_error {
 public:
  explicit ProposalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mlabs
