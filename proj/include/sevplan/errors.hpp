#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sevplan {

/// Non-finite input or an out-of-domain parameter (e.g. fuzzy margin <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Steering angle reached the tan(delta) singularity guard.
class SingularityError : public std::runtime_error {
 public:
  explicit SingularityError(const std::string& what, std::ptrdiff_t interval = -1)
      : std::runtime_error(interval < 0 ? what
                                        : what + " (interval " + std::to_string(interval) + ")"),
        interval_(interval) {}

  /// Control interval in which the singularity was hit, or -1 if unknown.
  std::ptrdiff_t interval() const noexcept { return interval_; }

 private:
  std::ptrdiff_t interval_;
};

/// Caller supplied something structurally unusable (bad bounds, grid mismatch, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario text could not be parsed; `where` names the line or field.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// Scenario parsed but violates an invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sevplan
