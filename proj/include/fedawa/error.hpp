#pragma once

#include <stdexcept>
#include <string>

namespace fedawa {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Two vectors with incompatible layer layouts were combined.
class LayoutError : public Error {
public:
    explicit LayoutError(const std::string& what) : Error(what) {}
};

/// An argument violated a documented precondition.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// A computation produced non-finite values.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(what) {}
};

/// A file could not be parsed (IDX, CSV, config, checkpoint).
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

/// Invalid or infeasible experiment configuration. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace fedawa
