#pragma once

#include <stdexcept>
#include <string>

namespace rtcal {

// Base class for every error raised by the library. The CLI maps these to
// exit status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range input (coordinates, weights, config values).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A file could not be read or did not follow its format.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Scene invariants (simple footprints, no overlap, ...) violated.
class SceneError : public Error {
 public:
  using Error::Error;
};

// Endpoint inside a building, zero-length path and similar.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// An operation that needs energy in the profile received an empty one.
class EmptyProfileError : public Error {
 public:
  using Error::Error;
};

// Correlation alignment had no admissible shift.
class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

// External simulator died, timed out or answered garbage.
class ExternalModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace rtcal
