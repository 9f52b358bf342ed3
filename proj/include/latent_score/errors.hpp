#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latent_score {

// Argument outside the mathematical domain of an operation (log of zero,
// non-positive Dirichlet weight, boundary coordinates, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated a structural precondition (shape mismatch, wrong data
// completeness, missing Laplace selection, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Cholesky factorization failed: the matrix is not positive definite.
class NonPdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite value showed up where a finite one is required.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

// MAP M step denominator is not positive.
class DegeneratePriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ML M step met a row with zero expected count.
class StarvedRowError : public std::runtime_error {
 public:
  StarvedRowError(const std::string& what, std::size_t row)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

// Exhaustive enumeration would exceed the configured cap.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. line() is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SelectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latent_score
