#pragma once

#include <stdexcept>
#include <string>

namespace vidpred {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining failure classes callers need to tell apart.

/// Bad or inconsistent configuration (unknown backbone, dataset too short, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem or decode failure. The message always names the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vidpred
