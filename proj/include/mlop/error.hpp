#pragma once

#include <stdexcept>
#include <string>

namespace mlop {

/// Invalid input, configuration, or precondition violation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Singular systems, rank deficiency, CFL violations and similar.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system and format errors.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mlop
