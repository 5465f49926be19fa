#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rsslim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad lengths, a spacing that does not tile the
/// perimeter, unknown config keys, unmet run preconditions.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A reference position lies closer to the blind radio than the far-field guard.
class FarFieldError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Not enough independent information to identify the requested parameters.
class RankDeficiencyError : public Error {
public:
    using Error::Error;
};

/// Covariance matrix is singular beyond the regularization tolerance, or
/// inputs are too few/degenerate for the operation.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Optimizer could not satisfy its convergence criteria often enough.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line and column of the offence.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace rsslim
