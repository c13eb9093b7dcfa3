#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace routeseq {

// Invalid argument: bad id, shape mismatch, out-of-range parameter.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed text input. `line()` is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that describes an inconsistent structure.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyGraphError : public StructuralError {
 public:
  using StructuralError::StructuralError;
};

// Route sampling exhausted its draw budget.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where a finite value is required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace routeseq
