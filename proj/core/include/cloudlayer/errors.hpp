#pragma once

#include <stdexcept>
#include <string>

namespace cloudlayer {

// Base of every error thrown by the library. Callers that only need to
// distinguish "bad input" from "internal failure" can catch these two.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function (x <= 0 for lnΓ, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Input data that cannot be modeled: constant fields, empty masks, too few pixels.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing files, shape mismatches, bad configuration values.
class InputError : public Error {
 public:
  using Error::Error;
};

// A mixture fit could not be produced (every restart hit an empty cluster).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace cloudlayer
