#pragma once

#include <stdexcept>
#include <string>

namespace facepain {

/// Malformed on-disk data. `field()` names the offending property when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& message, std::string field = {})
      : std::runtime_error(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Input violates an operation's precondition (bad dimensions, empty data, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical failure inside a solver (non-PD kernel, non-finite loss).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace facepain
