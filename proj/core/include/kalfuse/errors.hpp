#pragma once

#include <stdexcept>
#include <string>

namespace kalfuse {

/// Invalid configuration (bad keys, missing input files, unsupported options).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent data (file contents, manifests, argument values).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or size mismatch between related objects.
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

/// Numerical failure (singular innovation block, non-finite result).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kalfuse
