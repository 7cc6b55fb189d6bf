#pragma once

#include <stdexcept>
#include <string>

namespace qxfer {

// Persisted data that fails to parse or violates an invariant on load. The
// message carries the location (path:line).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Inconsistent experiment configuration (empty splits, missing inputs, mixed
// config hashes).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Bad command-line usage detected after parsing (e.g. an unknown backend).
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace qxfer
