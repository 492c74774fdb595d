#pragma once

#include <stdexcept>
#include <string>

namespace ordreg {

/// Raised for invalid caller input such as malformed labels or bad
/// configuration values. The CLI maps it to exit code 1.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when training produces a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ordreg
