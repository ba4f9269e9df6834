#pragma once

#include <stdexcept>
#include <string>

namespace rumor {

// Exit codes shared by every rumorctl subcommand.
enum class ExitCode : int {
  ok = 0,
  bad_config = 2,
  bad_input = 3,
  numeric_failure = 4,
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (records, graphs, feature files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf in a tensor, non-finite loss or gradient, shape mismatch in a kernel.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rumor
