#pragma once

#include <stdexcept>
#include <string>

namespace plr {

// Every failure raised by the library derives from Error so callers can map
// an error class to an exit status without string matching.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite value met where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Object used in the wrong state (e.g. backward with a stale cache).
class StateError : public Error {
public:
    using Error::Error;
};

// Invalid network description.
class SpecError : public Error {
public:
    using Error::Error;
};

// Bad configuration file or flag.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input file.
class FormatError : public Error {
public:
    using Error::Error;
};

// Dataset generation could not satisfy its constraints.
class GenerationError : public Error {
public:
    using Error::Error;
};

// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

// A required input file does not exist.
class MissingFileError : public IoError {
public:
    using IoError::IoError;
};

// An output file exists and overwriting was not requested.
class OverwriteError : public IoError {
public:
    using IoError::IoError;
};

}  // namespace plr
