#pragma once

#include <stdexcept>
#include <string>

namespace rbff {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied value is out of its allowed range.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A container, manifest or config file could not be parsed or validated.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A test row reached a fitting routine.
class LeakageError : public Error {
public:
    using Error::Error;
};

}  // namespace rbff
