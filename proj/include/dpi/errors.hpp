#pragma once

#include <stdexcept>
#include <string>

namespace dpi {

// Invalid or inconsistent configuration (bad graph, malformed input file,
// thresholds outside their admissible range, ...). The CLI maps this to exit
// code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure at run time (NaN beliefs, non-identifiable fit where a fit
// is required, ...). The CLI maps this to exit code 3.
struct RunError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dpi
