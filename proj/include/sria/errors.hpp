#pragma once

#include <stdexcept>
#include <string>

namespace sria {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke a precondition (bad dimensions, out-of-range parameter).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data on disk is missing, unreadable or inconsistent.
class DataError : public Error {
public:
    using Error::Error;
};

}  // namespace sria
