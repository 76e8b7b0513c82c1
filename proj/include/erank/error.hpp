#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace erank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file. `line()` is 1-based, 0 when unknown.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A value violates a documented precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace erank
