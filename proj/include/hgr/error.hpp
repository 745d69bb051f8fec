#pragma once

#include <stdexcept>
#include <string>

namespace hgr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or length disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid argument value: bad label, empty sequence, out-of-range index.
struct InputError : Error {
    using Error::Error;
};

// Inconsistent configuration, or parameters that do not match a variant.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed dataset or checkpoint file.
struct ParseError : Error {
    using Error::Error;
};

// File written by an unsupported format version.
struct VersionError : Error {
    using Error::Error;
};

// Non-finite value where a finite one is required (training blew up).
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace hgr
