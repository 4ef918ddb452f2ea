#pragma once

#include <stdexcept>
#include <string>

namespace levychaos {

/// Base of every error raised by the library. The CLI maps the subclasses
/// onto exit codes (validation 2, numeric 3, capability 4).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: wrong lengths, out-of-range parameters, bad configs.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ParameterError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigurationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class RangeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// A moment table or basis does not cover the requested degree.
class CoverageError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Quadrature or series failed to converge, or an indefinite Gram matrix.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Requested feature lies outside what is implemented (e.g. n > 3 copulas).
class CapabilityError : public Error {
public:
    using Error::Error;
};

}  // namespace levychaos
