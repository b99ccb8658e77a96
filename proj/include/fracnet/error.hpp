#ifndef FRACNET_ERROR_HPP
#define FRACNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace fracnet {

// Shapes of matrices/vectors do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Bad or missing input data (files, ragged CSV, non-finite values, invalid ids).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration or argument misuse.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical breakdown: singular systems, non-PSD covariances, unidentifiable inputs.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularSystemError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPsdError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class UnidentifiableInputError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace fracnet

#endif // FRACNET_ERROR_HPP
