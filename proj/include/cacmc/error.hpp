#pragma once

#include <stdexcept>
#include <string>

namespace cacmc {

// Error taxonomy mirrors the CLI exit codes: validation = 1, I/O = 2,
// numeric failure = 3.
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cacmc
