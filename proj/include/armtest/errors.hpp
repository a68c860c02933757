#pragma once

#include <stdexcept>
#include <string>

namespace armtest {

// Gene count does not match the workspace box count, or a chromosome
// string could not be parsed.
class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejection sampling ran out of attempts.
class SamplingInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cosine distance with a zero-norm operand.
class UndefinedDistance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or out-of-order reply from an external perception model.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Refit would make the model worse on the validation split.
class RefitRejected : public std::runtime_error {
 public:
  RefitRejected(double error_before, double error_after)
      : std::runtime_error("refit rejected: validation error " + std::to_string(error_after) +
                           " (repaired) vs " + std::to_string(error_before) + " (operating)"),
        error_before(error_before),
        error_after(error_after) {}

  double error_before;
  double error_after;
};

}  // namespace armtest
