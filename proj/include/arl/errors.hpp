#pragma once

#include <stdexcept>
#include <string>

namespace arl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/rank problems in tensor ops or model wiring.
struct DimensionError : Error {
  using Error::Error;
};

// Class label outside [0, C).
struct LabelError : Error {
  using Error::Error;
};

// Negative or out-of-range reversal coefficient.
struct CoefficientError : Error {
  using Error::Error;
};

// backward() called on a non-scalar.
struct RankError : Error {
  using Error::Error;
};

// Second backward() on a spent graph.
struct GraphReuseError : Error {
  using Error::Error;
};

// Invalid run/task configuration. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Missing labels, empty batches, malformed corpus content. CLI exit code 3.
struct DataError : Error {
  using Error::Error;
};

// Malformed file content; message carries the line number. CLI exit code 3.
struct ParseError : Error {
  using Error::Error;
};

// Non-finite losses or hypergradients. CLI exit code 4.
struct DivergenceError : Error {
  using Error::Error;
};

// Filesystem failures, message carries the path.
struct IoError : Error {
  using Error::Error;
};

}  // namespace arl
