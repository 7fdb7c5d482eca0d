#pragma once

#include <stdexcept>
#include <string>

namespace dnc {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dimension or shape disagreement between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Mathematically undefined input: zero vectors, NaN, zero-norm blends.
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Hyper-parameter outside its admissible range.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed dataset, checkpoint, or label.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace dnc
