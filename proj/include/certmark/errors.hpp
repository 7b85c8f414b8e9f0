#pragma once

#include <stdexcept>
#include <string>

namespace certmark {

// Bad input data: unreadable files, malformed records, checksum mismatches.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: NaN loss, calibration that cannot converge.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace certmark
