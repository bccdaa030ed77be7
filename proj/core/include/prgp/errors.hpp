#pragma once

#include <stdexcept>
#include <string>

namespace prgp {

// Base class for every error the library raises. The CLI maps these onto a
// single structured printer and a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller-supplied value violated an operation's preconditions.
class InputDomainError : public Error {
 public:
  using Error::Error;
};

// A physics model was evaluated outside its mathematical domain
// (negative radicand, pole, nonpositive spacing under a power).
class ModelDomainError : public Error {
 public:
  using Error::Error;
};

// A required CSV column is missing or mislabeled.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class EmptyDataError : public Error {
 public:
  using Error::Error;
};

// Cached factorizations do not match the current model state.
class InternalStateError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// More than half the pseudo-observation residuals of one equation were
// infeasible; the regularizer carries no usable signal.
class RegularizerDegeneracyError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Gram matrix stayed indefinite through the whole jitter escalation ladder.
class IllConditionedKernelError : public Error {
 public:
  IllConditionedKernelError(const std::string& what, double final_jitter)
      : Error(what), final_jitter_(final_jitter) {}

  // Last relative jitter attempted before giving up.
  double final_jitter() const { return final_jitter_; }

 private:
  double final_jitter_;
};

}  // namespace prgp
