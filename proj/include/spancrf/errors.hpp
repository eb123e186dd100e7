// Error categories used across the library. The CLI maps them to exit codes:
// DataError -> 2, NumericError -> 3, anything else -> 1.
#pragma once

#include <stdexcept>
#include <string>

namespace spancrf {

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spancrf
