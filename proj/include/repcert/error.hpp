#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace repcert {

/// Raised when an input violates an operation's precondition (bad shape,
/// wrong kind of matrix, malformed file). The CLI maps it to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Syntax error in a presentation or linear-system file.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace repcert
