#pragma once

#include <stdexcept>
#include <string>

namespace patcls {

/// Input that is well-formed at the byte level but violates a contract:
/// unknown labels, shape mismatches, bad configuration. CLI exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable/unwritable files and corrupt binary containers. CLI exit code 2.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace patcls
