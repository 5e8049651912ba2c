#pragma once

#include <stdexcept>
#include <string>

namespace alsprog {

// Error taxonomy mirrors the CLI exit codes:
//   ConfigError -> 1, DataError -> 2, NumericError -> 3.

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace alsprog
