#pragma once

#include <stdexcept>
#include <string>

namespace mbias {

/// Non-finite values, diverged training, degenerate numerics.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration or malformed input file.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mbias
