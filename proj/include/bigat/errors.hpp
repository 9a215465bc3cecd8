#pragma once

#include <stdexcept>
#include <string>

namespace bigat {

// Shape or dimensionality violations (mismatched operands, bad axes).
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values produced by a forward op, or other numeric failure.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// API misuse: violated preconditions that are not shape related.
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data (track files, grids, manifests).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad run configuration (unknown keys, missing values, unknown names).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bigat
