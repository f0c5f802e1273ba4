#pragma once

#include <stdexcept>
#include <string>

namespace lens {

/// Malformed or truncated input file (bad magic, unknown version, ...).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration document or option combination.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// An input that must not be empty was empty.
struct EmptyInputError : std::runtime_error {
    explicit EmptyInputError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lens
