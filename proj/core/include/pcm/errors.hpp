#pragma once

#include <stdexcept>
#include <string>

namespace pcm {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input data (bad row, bad timestamp, unreadable file body).
struct ParseError : Error {
  using Error::Error;
};

// Invalid configuration: schema/constraint/manifest contents, flag values,
// version mismatches in persisted artifacts.
struct ConfigError : Error {
  using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractViolation : Error {
  using Error::Error;
};

// Optimization diverged or produced non-finite values.
struct TrainingError : Error {
  using Error::Error;
};

// A metric is undefined on the given inputs (e.g. single-class AUC).
struct MetricError : Error {
  using Error::Error;
};

// Hyperparameter search could not produce any scored trial.
struct SearchError : Error {
  using Error::Error;
};

// Synthetic generation could not satisfy the requested spec.
struct GenerationError : Error {
  using Error::Error;
};

}  // namespace pcm
