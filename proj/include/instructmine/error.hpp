// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace instructmine {

/// Input data violates a documented contract: bad record, out-of-range score,
/// uncovered id, singular design. Reported by the CLI with exit code 2.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arguments that can never be valid regardless of the data (exit code 1).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The remote scorer answered with something the wire protocol does not allow.
class ProtocolError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace instructmine
