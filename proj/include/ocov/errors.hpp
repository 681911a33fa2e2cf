#pragma once

#include <stdexcept>
#include <string>

namespace ocov {

// Failure classes map one-to-one onto CLI exit codes.

/// Bad or missing configuration, or a stage run out of dependency order.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input file is missing, unreadable or structurally unusable.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A failure while processing otherwise valid inputs.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitInput = 3,
  kExitRuntime = 4,
};

}  // namespace ocov
