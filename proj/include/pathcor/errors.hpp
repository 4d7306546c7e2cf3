#pragma once

#include <stdexcept>
#include <string>

namespace pathcor {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parameters or data that violate a documented precondition.
class InputError : public Error {
public:
    using Error::Error;
};

// A matrix that must be inverted is singular (or numerically so).
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double condition_number)
        : Error(what), condition_number_(condition_number) {}

    double condition_number() const noexcept { return condition_number_; }

private:
    double condition_number_;
};

// Operation requested under the wrong constraint mode.
class ModeError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed CSV or JSON input. Row and column are 1-based; 0 means unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0, std::size_t column = 0)
        : Error(what), row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

}  // namespace pathcor
