// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace climcast {

/// Base for every error the library raises. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (bad header, unparsable cell, invalid value).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Weekly records do not form a gap-free sequence.
class AlignmentError : public Error {
public:
    using Error::Error;
};

/// Precondition violation on arguments (ranges, lengths, missing data).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Tensor or model dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or singular systems.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace climcast
