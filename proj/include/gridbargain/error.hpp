#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridbargain {

enum class ErrorCode {
  InvariantViolation,
  DisconnectedGraph,
  LengthMismatch,
  TooFewScenarios,
  KindMismatch,
  Infeasible,
  SolverStall,
  NoConvergence,
  NegativeGamma,
  ZeroIdealCost,
  BargainingFailed,
  FileError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// One failed rule found while validating a model or config.
struct Violation {
  std::string field;
  std::string rule;
};

/// Thrown by the validators; carries every violation found, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<Violation> violations,
                           ErrorCode code = ErrorCode::InvariantViolation);

  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::vector<Violation> violations_;
};

}  // namespace gridbargain
