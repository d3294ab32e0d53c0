#pragma once

#include <atomic>
#include <cstddef>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace relx {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line and the offending field.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : Error("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// A caller broke an operation's precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configured resource cap was exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value in a numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline std::atomic<std::size_t>& warning_counter() {
  static std::atomic<std::size_t> count{0};
  return count;
}
inline std::atomic<bool>& warnings_muted() {
  static std::atomic<bool> muted{false};
  return muted;
}
}  // namespace detail

/// Emit a non-fatal diagnostic on stderr. Warnings never alter control flow.
inline void warn(std::string_view message) {
  ++detail::warning_counter();
  if (!detail::warnings_muted()) std::cerr << "warning: " << message << '\n';
}

inline std::size_t warning_count() { return detail::warning_counter().load(); }
inline void mute_warnings(bool muted) { detail::warnings_muted() = muted; }

}  // namespace relx
