#pragma once

#include <stdexcept>
#include <string>

namespace malfuse {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input that could not be parsed (bad manifest row, bad hex token,
// truncated model file, ...).  Messages include file/line context when known.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally valid input that violates a contract (label out of range,
// duplicate id, dimension mismatch, bad parameter value, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, unreadable path, write failure).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace malfuse
