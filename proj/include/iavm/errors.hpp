#pragma once

#include <stdexcept>
#include <string>

namespace iavm {

// Pseudolikelihood is unbounded (e.g. all responses equal); no finite MPLE.
struct SeparationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Iterative routine exhausted its iteration budget.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CFTP failed to coalesce within the configured epoch budget.
struct CoalescenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration requested beyond the supported state-space size.
struct EnumerationLimitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Artifact was produced under a different model/data configuration.
struct DigestMismatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A statistic referenced a node attribute the network does not carry.
struct MissingAttributeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Series has zero variance; autocorrelation-based diagnostics undefined.
struct ConstantSeriesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sample covariance at a design point carries no signal.
struct DegenerateCovarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace iavm
