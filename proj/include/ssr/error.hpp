#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ssr {

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// invalid mixture, incompatible certificate tables, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when evaluating a dynamics expression produces a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, std::size_t coordinate)
      : std::runtime_error(what), coordinate_(coordinate) {}
  std::size_t coordinate() const noexcept { return coordinate_; }

 private:
  std::size_t coordinate_;
};

/// Syntax error in an expression or formula; `position` is a 0-based
/// character offset into the parsed text.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

/// A configuration the implementation does not handle (e.g. full
/// covariances on an axis-aligned grid).
class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace ssr
