#pragma once

#include <stdexcept>
#include <string>

namespace driftkit {

/// Base class for all driftkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameters or an impossible configuration (bad test fraction,
/// B = 0, a split that empties a class, ...). CLI exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Misuse of an API: dimension mismatch, hypothesis preconditions not met.
/// CLI exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Problems with the data itself: ingestion failures, NaN cells, label
/// support violations, binning degeneracies, unwritable outputs.
/// CLI exit code 2.
class DataError : public Error {
public:
    using Error::Error;
};

/// Numerical model fitting failed (single-class input, non-finite loss).
class FitError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace driftkit
