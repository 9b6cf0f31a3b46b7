#pragma once

#include <stdexcept>
#include <string>

namespace ecgi {

// Error categories map onto CLI exit codes (see tools/).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct ParameterError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct MissingInputError : Error {
    using Error::Error;
};

struct ResourceLimitError : Error {
    using Error::Error;
};

} // namespace ecgi
