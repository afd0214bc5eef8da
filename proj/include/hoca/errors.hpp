#pragma once

#include <stdexcept>
#include <string>

namespace hoca {

// Error taxonomy shared by the whole library. Exceptions carry a plain
// message; callers that need exit codes map the types (see tools/).

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Raised when materializing a dense tensor would exceed the configured
// element cap. The dense path is an oracle, not a production path.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace hoca
