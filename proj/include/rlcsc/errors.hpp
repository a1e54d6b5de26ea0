#pragma once

#include <stdexcept>
#include <string>

namespace rlcsc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension disagreements.
struct ShapeError : Error {
    using Error::Error;
};

// Unreadable or unwritable files.
struct IoError : Error {
    using Error::Error;
};

// Malformed configs, manifests, checkpoints, patch files.
struct FormatError : Error {
    using Error::Error;
};

// Non-finite values, divergence, invalid numeric arguments.
struct NumericError : Error {
    using Error::Error;
};

} // namespace rlcsc
