#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unisafe {

/// Violated precondition on shapes or argument ranges.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Evaluation point outside the open polytope K_p.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The strict (or tightened) inequality system has no solution.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_margin)
      : std::runtime_error(what), max_margin_(max_margin) {}

  /// Best max-margin reached by the feasibility search (positive when infeasible).
  double max_margin() const { return max_margin_; }

 private:
  double max_margin_;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content. `offset` is a byte offset when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed file whose contents disagree with its own header or the caller's expectations.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input file missing or unreadable.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace unisafe
