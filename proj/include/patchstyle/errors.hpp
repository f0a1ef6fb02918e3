#pragma once

#include <stdexcept>
#include <string>

namespace patchstyle {

// Shape or size contract violated by an operation's arguments.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced where the contract requires finite results.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable, truncated or unsupported file content.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid parameter value (out of range, inconsistent with others).
struct ParamError : std::runtime_error {
    explicit ParamError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace patchstyle
