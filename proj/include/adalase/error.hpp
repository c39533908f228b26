#pragma once

#include <stdexcept>
#include <string>

namespace adalase {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or parameter shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An index or argument lies outside its admissible interval.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Input values violate a documented invariant (e.g. label rows not summing to 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A file on disk is malformed or truncated.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Configuration values are invalid. `field()` carries the dotted path when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// An augmentation kind was requested where it is not allowed.
class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Mixing augmentations need at least two samples.
class DegenerateBatchError : public Error {
 public:
  using Error::Error;
};

/// The worst-layer audit lacks the probe data it needs.
class AuditError : public Error {
 public:
  using Error::Error;
};

}  // namespace adalase
