#pragma once

#include <stdexcept>
#include <string>

namespace maelab {

// Shape/usage violations (mismatched extents, bad arguments).
struct TensorError : std::runtime_error {
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

// A forward or backward op produced NaN/Inf. Message names the op.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed container files (SPGM, TGCK, manifests).
struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (unknown keys, invalid values).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace maelab
