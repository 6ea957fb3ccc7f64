#pragma once

#include <stdexcept>
#include <string>

namespace mal {

/// Base class for every error thrown by the toolkit.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions disagree; the message names the layer/interface.
struct ShapeError : Error {
    using Error::Error;
};

/// Invalid settings or violated call preconditions.
struct ConfigError : Error {
    using Error::Error;
};

/// API contract violations (e.g. non-identity boundary injection).
struct ContractError : Error {
    using Error::Error;
};

/// Malformed on-disk data; messages carry byte positions where known.
struct FormatError : Error {
    using Error::Error;
};

/// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

/// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

/// Training produced a non-finite loss.
struct DivergenceError : NumericError {
    int epoch;
    DivergenceError(int epoch_, const std::string& what) : NumericError(what), epoch(epoch_) {}
};

} // namespace mal
