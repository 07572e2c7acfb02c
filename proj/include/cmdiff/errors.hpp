#pragma once

#include <stdexcept>
#include <string>

namespace cmdiff {

// Invalid configuration (schedule endpoints, bin counts, model/config mismatches).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad call arguments (shape mismatches, out-of-range step indices).
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Problems with data on disk (orphan pairs, corrupt files, missing edge maps).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (diverged training step).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cmdiff
