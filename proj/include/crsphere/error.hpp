#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace crsphere {

enum class ErrorKind {
  parse,
  division_by_zero,
  degree_overflow,
  context_mismatch,
  zero_constant_term,
  untrusted_read,
  nonzero_constant_argument,
  singular_jacobian,
  not_on_hypersurface,
  singular_gradient,
  non_real,
  levi_degenerate,
  trust_exhausted,
  sampling_unavailable,
  newton_failure,
  substitution_out_of_range,
  invalid_input,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::division_by_zero: return "division_by_zero";
    case ErrorKind::degree_overflow: return "degree_overflow";
    case ErrorKind::context_mismatch: return "context_mismatch";
    case ErrorKind::zero_constant_term: return "zero_constant_term";
    case ErrorKind::untrusted_read: return "untrusted_read";
    case ErrorKind::nonzero_constant_argument: return "nonzero_constant_argument";
    case ErrorKind::singular_jacobian: return "singular_jacobian";
    case ErrorKind::not_on_hypersurface: return "not_on_hypersurface";
    case ErrorKind::singular_gradient: return "singular_gradient";
    case ErrorKind::non_real: return "non_real";
    case ErrorKind::levi_degenerate: return "levi_degenerate";
    case ErrorKind::trust_exhausted: return "trust_exhausted";
    case ErrorKind::sampling_unavailable: return "sampling_unavailable";
    case ErrorKind::newton_failure: return "newton_failure";
    case ErrorKind::substitution_out_of_range: return "substitution_out_of_range";
    case ErrorKind::invalid_input: return "invalid_input";
  }
  return "unknown";
}

/// Base exception for every failure raised by the library. The kind is
/// stable and machine readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with the byte offset of the offending input position.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& message)
      : Error(ErrorKind::parse, message + " at offset " + std::to_string(position)),
        position_(position),
        detail_(message) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

/// Trust exhaustion carries the largest number of field applications that
/// the input could still support.
class TrustError : public Error {
 public:
  TrustError(int max_achievable, const std::string& message)
      : Error(ErrorKind::trust_exhausted, message), max_achievable_(max_achievable) {}

  int max_achievable() const noexcept { return max_achievable_; }

 private:
  int max_achievable_;
};

}  // namespace crsphere
