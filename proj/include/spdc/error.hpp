#ifndef SPDC_ERROR_HPP
#define SPDC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace spdc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/size preconditions (non-square input, mismatched operands, ...).
struct DimensionError : Error {
  using Error::Error;
};

// Zero or near-zero pivot in an unpivoted factorization.
struct SingularPivotError : Error {
  using Error::Error;
};

// Blinding-vector generation exhausted its resample budget.
struct KeyGenError : Error {
  using Error::Error;
};

// A server received a block out of order, twice, or from the wrong peer.
struct ProtocolViolation : Error {
  using Error::Error;
};

// Simulation stalled with incomplete results; message carries a trace dump.
struct DeadlockError : Error {
  using Error::Error;
};

// Re-randomized retries exhausted without a nonsingular factorization.
struct RetryExhaustedError : Error {
  using Error::Error;
};

// File parse / IO failures; message carries line/column diagnostics.
struct IoError : Error {
  using Error::Error;
};

}  // namespace spdc

#endif
