#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace positivity {

enum class ErrorCode {
  MissingColumn,
  NonBinaryAction,
  UnparseableValue,
  UnknownStratum,
  EmptyTable,
  EmptyData,
  SpecPatternMissing,
  PlanPatternMissing,
  NoActionVariation,
  RankDeficientDesign,
  UndefinedCellMean,
  PositivityViolation,
  NoTreatedUnits,
  TooManyFailedReplicates,
  InvalidLevel,
  InvalidSpec,
  InvalidArgument,
  UsageError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryAction: return "NonBinaryAction";
    case ErrorCode::UnparseableValue: return "UnparseableValue";
    case ErrorCode::UnknownStratum: return "UnknownStratum";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::SpecPatternMissing: return "SpecPatternMissing";
    case ErrorCode::PlanPatternMissing: return "PlanPatternMissing";
    case ErrorCode::NoActionVariation: return "NoActionVariation";
    case ErrorCode::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorCode::UndefinedCellMean: return "UndefinedCellMean";
    case ErrorCode::PositivityViolation: return "PositivityViolation";
    case ErrorCode::NoTreatedUnits: return "NoTreatedUnits";
    case ErrorCode::TooManyFailedReplicates: return "TooManyFailedReplicates";
    case ErrorCode::InvalidLevel: return "InvalidLevel";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

/// Library-wide exception. Carries an error code plus, when the failure is
/// tied to a covariate pattern and arm, the offending cell.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  Error(ErrorCode code, std::string message, std::vector<int> pattern,
        std::optional<int> arm = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        pattern_(std::move(pattern)),
        arm_(arm) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<std::vector<int>>& pattern() const noexcept { return pattern_; }
  std::optional<int> arm() const noexcept { return arm_; }

 private:
  ErrorCode code_;
  std::optional<std::vector<int>> pattern_;
  std::optional<int> arm_;
};

}  // namespace positivity
