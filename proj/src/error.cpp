#include "gridbargain/error.hpp"

namespace gridbargain {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewScenarios: return "TooFewScenarios";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::SolverStall: return "SolverStall";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NegativeGamma: return "NegativeGamma";
    case ErrorCode::ZeroIdealCost: return "ZeroIdealCost";
    case ErrorCode::BargainingFailed: return "BargainingFailed";
    case ErrorCode::FileError: return "FileError";
  }
  return "Unknown";
}

namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::string out = "validation failed:";
  for (const auto& v : violations) {
    out += " [" + v.field + ": " + v.rule + "]";
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations, ErrorCode code)
    : Error(code, summarize(violations)), violations_(std::move(violations)) {}

}  // namespace gridbargain
