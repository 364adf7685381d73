#pragma once

#include <stdexcept>
#include <string>

namespace dlab {

// Bad input, bad configuration, or a violated precondition. Maps to exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Numerical failure discovered while evaluating (log of a non-positive value,
// NaN/inf in a checked quantity). Maps to exit code 2.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public NumericError {
public:
    using NumericError::NumericError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace dlab
