#pragma once

#include <stdexcept>
#include <string>

namespace nilwalk {

// Structural/input problems: bad specs, violated preconditions, malformed files.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures: singular solves, non-SPD Gram matrices, degenerate fits.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nilwalk
