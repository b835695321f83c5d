#pragma once

#include <stdexcept>
#include <string>

namespace hpanel {

// Base of every error raised by the library. The CLI maps the two families
// below onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input does not satisfy a structural contract (exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Arithmetic breakdown inside an otherwise valid computation (exit code 3).
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RankDeficient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularBlock : public NumericalError {
 public:
  SingularBlock(int i, int j, double condition)
      : NumericalError("singular Gram block at (i=" + std::to_string(i) +
                       ", j=" + std::to_string(j) +
                       "), condition estimate " + std::to_string(condition)),
        i_(i), j_(j), condition_(condition) {}

  int i() const { return i_; }
  int j() const { return j_; }
  double condition() const { return condition_; }

 private:
  int i_;
  int j_;
  double condition_;
};

// CSV ingestion failures. `kind` names the failure class.
class CsvError : public ValidationError {
 public:
  enum class Kind { MissingColumn, RaggedTime, NonNumericCell, DuplicateKey, Io };

  CsvError(Kind kind, const std::string& what) : ValidationError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace hpanel
