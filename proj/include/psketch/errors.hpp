#pragma once

#include <stdexcept>
#include <string>

namespace psketch {

// Exception hierarchy. The CLI maps these onto exit codes.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise out-of-domain numeric input.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based line number of the offending line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A memory or size guard was exceeded.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A factorization met a (numerically) rank-deficient matrix; re-seeding usually helps.
class ConditioningError : public Error {
public:
    using Error::Error;
};

/// Degenerate input such as a zero column where a basis is required.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Configuration failed validation; the message lists every failure.
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace psketch
