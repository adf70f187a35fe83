#pragma once

#include <stdexcept>
#include <string>

namespace mocca {

struct InvalidDimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operator has an all-zero row or column where a nonzero one is required.
struct DegenerateOperator : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Requested an operation (subgradient selector, closed-form prox) that is
/// not registered for this function object.
struct UnsupportedFunction : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedSize : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace mocca
