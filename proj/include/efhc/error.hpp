#pragma once

#include <stdexcept>
#include <string>

namespace efhc {

// Precondition violated by the caller.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative numerics did not converge or a system was singular.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed external data (IDX files, edge lists, CSV, config).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not defined for the given input kind.
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A bounded retry loop ran out of attempts.
class RetryExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace efhc
