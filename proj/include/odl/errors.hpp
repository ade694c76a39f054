#pragma once

#include <stdexcept>

namespace odl {

// Error taxonomy shared by the whole library. The CLI maps each type to a
// distinct process exit code (see cli.hpp).

// Invalid configuration or flag combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: schema violations, unordered streams, bad labels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric divergence: a parameter or metric became non-finite, or a ratio is
// undefined.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem/stream failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace odl
