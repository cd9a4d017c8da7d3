// ============================================================================
// grlnet/errors.hpp - exception types shared across the library
// ============================================================================
#pragma once

#include <stdexcept>
#include <string>

namespace grlnet {

/// File missing, unreadable or unwritable.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input, bad configuration or a violated precondition.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// NaN/Inf or another numerical breakdown during computation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace grlnet
