#pragma once

#include <stdexcept>
#include <string>

namespace cfrl {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed tabular input: missing columns, bad header, empty file.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// An individual's row count does not match the declared horizon.
class RaggedDataError : public Error {
public:
    using Error::Error;
};

/// A cell or argument holds an unusable value (non-finite, non-integer, out of range).
class ValueError : public Error {
public:
    using Error::Error;
};

/// Array dimensions are inconsistent with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A count constraint is violated (too few individuals, folds > N, ...).
class SizeError : public Error {
public:
    using Error::Error;
};

/// A value lies outside its declared finite domain (e.g. z not in z_space).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Operation called on an object in the wrong lifecycle state (unfitted, untrained).
class StateError : public Error {
public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Training produced non-finite quantities and cannot continue.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cfrl
