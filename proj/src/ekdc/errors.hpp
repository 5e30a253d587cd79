#pragma once

#include <stdexcept>
#include <string>

namespace ekdc {

// Error hierarchy. The categories map 1:1 onto the CLI exit codes and the
// C API status values: config -> 2, data -> 3, divergence -> 4, rest -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct DataError : Error {
  using Error::Error;
};

struct DivergenceError : Error {
  using Error::Error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

}  // namespace ekdc
