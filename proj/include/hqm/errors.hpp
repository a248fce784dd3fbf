#pragma once

#include <stdexcept>
#include <string>

namespace hqm {

// Every failure raised by the library derives from Error so callers can
// catch the whole family; the subclasses name the failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter lies outside its physical domain (probability > 1, chi >= 1, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A node state machine was driven through a forbidden transition.
class SequencingError : public Error {
 public:
  using Error::Error;
};

/// Loop slot or switch timing cannot be honoured.
class SchedulingError : public Error {
 public:
  using Error::Error;
};

/// The requested output order cannot be produced by whole loop cycles.
class UnreachableOrdering : public SchedulingError {
 public:
  using SchedulingError::SchedulingError;
};

/// Two photons would share a loop slot (phase distance below the rise time).
class SlotCollision : public SchedulingError {
 public:
  using SchedulingError::SchedulingError;
};

/// A compiled switch schedule fails validate_sequence.
class SwitchConstraintViolation : public SchedulingError {
 public:
  using SchedulingError::SchedulingError;
};

/// A fine-tune shift is not a whole number of steps.
class QuantizationError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

/// A correlation estimate has a zero denominator.
class UndefinedEstimate : public Error {
 public:
  using Error::Error;
};

class FitFailure : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class NoCrossingError : public Error {
 public:
  using Error::Error;
};

class UnphysicalInput : public Error {
 public:
  using Error::Error;
};

/// Configuration file or CLI input is malformed. Carries the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace hqm
