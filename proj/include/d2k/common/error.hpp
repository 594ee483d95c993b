#pragma once

#include <stdexcept>
#include <string>

namespace d2k {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  /// Short machine-readable error code, echoed in service replies.
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message) : Error("dimension_mismatch", message) {}
};

class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& message) : Error("non_finite", message) {}
};

/// Raised when an input violates its documented invariants. `field()` names
/// the offending field so that callers can point at it.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error("schema_violation", field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error("conflict", message) {}
};

}  // namespace d2k
