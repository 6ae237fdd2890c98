#pragma once

#include <stdexcept>
#include <string>

namespace gfstack {

/// Bad input or violated precondition. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system failure (missing file, unwritable path). CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gfstack
