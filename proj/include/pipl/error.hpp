#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pipl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract arguments.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Expression text that does not follow the grammar.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset)
        : Error(message + " at byte " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Expression evaluation outside the domain of an operator (ln of nonpositive, division by zero).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Linear solve breakdown or nonlinear iteration failure.
class SolverError : public Error {
public:
    SolverError(const std::string& message, int time_level = -1)
        : Error(time_level >= 0 ? message + " (time level " + std::to_string(time_level) + ")"
                                : message),
          time_level_(time_level) {}

    int time_level() const noexcept { return time_level_; }

private:
    int time_level_;
};

}  // namespace pipl
