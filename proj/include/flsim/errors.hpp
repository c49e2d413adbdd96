#pragma once

#include <stdexcept>

namespace flsim {

// Invalid configuration or malformed input files. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite losses/gradients or an exhausted sampling retry budget.
// CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flsim
