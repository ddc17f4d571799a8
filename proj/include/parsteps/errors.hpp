#pragma once

#include <stdexcept>
#include <string>

namespace parsteps {

// Malformed or inconsistent input (files, configs, derivations). CLI maps
// these to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical breakdown (singular systems, invalid parameters at compute time).
// CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace parsteps
