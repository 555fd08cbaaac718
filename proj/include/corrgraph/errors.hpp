#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace corrgraph {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed scalar input (timestamps, durations, IP addresses).
class ParseError : public Error {
public:
    using Error::Error;
};

/// A file row that does not conform to its schema. Carries the 0-based
/// data-row index when the error is attributable to one row.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& message, std::optional<std::size_t> row = std::nullopt)
        : Error(row ? "row " + std::to_string(*row) + ": " + message : message), row_(row) {}

    std::optional<std::size_t> row() const noexcept { return row_; }

private:
    std::optional<std::size_t> row_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InvalidWindow : public Error {
public:
    using Error::Error;
};

/// TI lookup on an entity type that is not threat-intelligence gated.
class NotGated : public Error {
public:
    using Error::Error;
};

class StoreUnavailable : public Error {
public:
    using Error::Error;
};

class CorruptStore : public Error {
public:
    using Error::Error;
};

class DanglingEndpoint : public Error {
public:
    using Error::Error;
};

/// A structural invariant was violated by caller-supplied data (for example a
/// non-simple graph handed to the graph builder).
class InvariantViolation : public Error {
public:
    using Error::Error;
};

}  // namespace corrgraph
