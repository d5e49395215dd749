#pragma once

#include <stdexcept>
#include <string>

namespace spamp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite component, wrong dimension, out-of-range argument.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but the operation is undefined on it (e.g. normalizing zero).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Tracker or layer state whose invariants no longer hold.
class InvalidState : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class InvalidModel : public Error {
 public:
  using Error::Error;
};

// Unreadable input file or unwritable output path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spamp
