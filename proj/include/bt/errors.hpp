#pragma once

#include <stdexcept>
#include <string>

namespace bt {

/// Invalid configuration or family parameters. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Malformed input file; the message carries the offending row.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row)
        : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

/// A policy asked for more rewards than the tape holds for some arm.
class TapeUnderflow : public std::runtime_error {
public:
    explicit TapeUnderflow(std::size_t arm)
        : std::runtime_error("reward tape exhausted for arm " + std::to_string(arm)), arm_(arm) {}
    std::size_t arm() const noexcept { return arm_; }

private:
    std::size_t arm_;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Work limit exceeded (e.g. interval cap in LinUCB subdivision).
class ResourceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedModel : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

} // namespace bt
