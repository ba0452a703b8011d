#pragma once

#include <stdexcept>
#include <string>

namespace semimage {

/// Bad input data: malformed files, shape mismatches, unknown labels.
/// The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad invocation or configuration. The CLI maps it to exit code 1.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace semimage
