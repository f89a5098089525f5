#pragma once

#include <stdexcept>
#include <string>

namespace goxn {

/// Base of every error the engine raises for bad input or a failed phase.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Structurally invalid input (mixed windows, bad topology, bad params).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Config or report file that does not match its strict schema.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Transport-level failure talking to a metric endpoint; retriable.
class CollectionError : public Error {
public:
    using Error::Error;
};

/// Response body that could not be decoded.
class ParseError : public Error {
public:
    using Error::Error;
};

/// File missing or unreadable/unwritable.
class IoError : public Error {
public:
    using Error::Error;
};

/// The environment refused an action (apply, revert, clean, setup).
class EnvironmentError : public Error {
public:
    using Error::Error;
};

/// Operation called out of lifecycle order.
class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace goxn
