#pragma once

#include <stdexcept>
#include <string>

namespace amdp {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape or index mismatch between inputs.
struct DimensionError : Error {
    using Error::Error;
};

/// A model instance violates its probabilistic invariants (bad rows,
/// non-finite costs, malformed policies).
struct ModelError : Error {
    using Error::Error;
};

/// The induced Markov chain is not ergodic: reducible, periodic, or with
/// a degenerate stationary distribution.
struct ErgodicityError : Error {
    using Error::Error;
};

/// A numerical routine failed to meet its accuracy contract.
struct NumericalError : Error {
    using Error::Error;
};

/// Two independent computations of the same quantity disagree.
struct OracleError : NumericalError {
    using NumericalError::NumericalError;
};

/// Invalid parameter value or incompatible configuration.
struct ConfigError : Error {
    using Error::Error;
};

/// Missing, empty, or malformed input data.
struct DataError : Error {
    using Error::Error;
};

/// Problem instance exceeds a hard capacity limit.
struct CapacityError : Error {
    using Error::Error;
};

} // namespace amdp
