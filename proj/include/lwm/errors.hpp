#pragma once

#include <stdexcept>
#include <string>

namespace lwm {

// Base class for all library errors. CLI maps these to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Sample has fewer than r/4 negatives or non-negatives; caller may resample.
struct ImbalancedSample : Error { using Error::Error; };

// Sequence lengths incompatible with the requested operation.
struct SizeMismatch : Error { using Error::Error; };

// Latent shape does not match the embedding parameters.
struct ShapeMismatch : Error { using Error::Error; };

// Bit sequences of unequal length where equal length is required.
struct LengthMismatch : Error { using Error::Error; };

struct EmptyInput : Error { using Error::Error; };

struct EmptyDirectory : Error { using Error::Error; };

// Both samples constant (or too small) so no t statistic exists.
struct DegenerateSample : Error { using Error::Error; };

struct NonpositiveSigma : Error { using Error::Error; };

struct OutOfRange : Error { using Error::Error; };

// Experiment config or channel spec string rejected; message names the
// violated constraint.
struct ConfigInvalid : Error { using Error::Error; };

struct IoError : Error { using Error::Error; };

// Constructor invariant violation on a domain type.
struct InvalidArgument : Error { using Error::Error; };

} // namespace lwm
