#pragma once

#include <stdexcept>
#include <string>

namespace causal {

// Input that violates a documented format or contract. Maps to exit code 1
// at the command line.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus or data file.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failure while computing (divergence, I/O). Maps to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace causal
