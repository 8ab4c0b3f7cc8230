#pragma once

#include <stdexcept>
#include <string>

namespace qrs {

// Malformed input data (headers, signal files, annotation streams).
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// A required input file or directory does not exist.
struct MissingInput : std::runtime_error {
    explicit MissingInput(const std::string& msg) : std::runtime_error(msg) {}
};

// Storage format we do not decode (anything other than 212 / 16).
struct UnsupportedFormat : std::runtime_error {
    explicit UnsupportedFormat(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated an operation precondition.
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Non-finite value surfaced inside a numeric kernel.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (CLI / config file level).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace qrs
