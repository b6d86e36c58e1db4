#pragma once

#include <stdexcept>
#include <string>

namespace qsum {

// Base of everything the library throws. The CLI maps the subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user input: DSL syntax, JSON schema, invalid configuration.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line = 0, int column = 0)
        : Error(line > 0 ? msg + " (line " + std::to_string(line) + ", column " +
                               std::to_string(column) + ")"
                         : msg),
          line_(line), column_(column) {}

    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

// A structural hypothesis on the equation does not hold.
class ConditionError : public Error {
public:
    using Error::Error;
};

// The requested direction lies on (or numerically next to) a singular ray.
class SingularDirectionError : public Error {
public:
    SingularDirectionError(const std::string& msg, int grid_index = 0)
        : Error(msg), grid_index_(grid_index) {}
    int grid_index() const noexcept { return grid_index_; }

private:
    int grid_index_;
};

// Non-convergence, insufficient range, overflow, etc.
class NumericalError : public Error {
public:
    using Error::Error;
};

class NotAUnit : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

} // namespace qsum
