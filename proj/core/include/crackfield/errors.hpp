#pragma once

#include <stdexcept>
#include <string>

namespace crackfield {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or non-finite input (NaN positions, duplicate ids, bad parameters).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// det F <= 0: the local motion maps a material element through itself.
class InvertedElementError : public Error {
public:
    using Error::Error;
};

/// A matrix is too close to singular for the requested factorization.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// A fit produced a non-physical result or had too little data.
class FitError : public Error {
public:
    using Error::Error;
};

/// A scalar field carried the wrong unit for the requested operation.
class UnitMismatchError : public Error {
public:
    using Error::Error;
};

/// File format violation; the message carries file name and location.
class IoError : public Error {
public:
    using Error::Error;
};

/// Configuration document violation (unknown key, bad type, missing section).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace crackfield
