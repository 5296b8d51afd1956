#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace respira {

enum class ErrorKind {
  MissingFile,
  SchemaViolation,
  DuplicateTrial,
  BadHeader,
  NonMonotoneTime,
  RaggedRow,
  InvalidSpec,
  IoFailure,
  InvalidRecord,
  AllRowsDropped,
  EmptyMatrix,
  DimensionMismatch,
  InvalidOverlap,
  NonPowerOfTwoLength,
  TooShort,
  NonFiniteInput,
  EmptyBand,
  EmptyInput,
  EmptyNode,
  SingleClassTraining,
  NonFiniteLoss,
  InvalidParams,
  TooFewInstances,
  BadK,
  AllFoldsSkipped,
  OneClassOnly,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::SchemaViolation: return "SchemaViolation";
    case ErrorKind::DuplicateTrial: return "DuplicateTrial";
    case ErrorKind::BadHeader: return "BadHeader";
    case ErrorKind::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorKind::RaggedRow: return "RaggedRow";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::InvalidRecord: return "InvalidRecord";
    case ErrorKind::AllRowsDropped: return "AllRowsDropped";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidOverlap: return "InvalidOverlap";
    case ErrorKind::NonPowerOfTwoLength: return "NonPowerOfTwoLength";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::EmptyBand: return "EmptyBand";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyNode: return "EmptyNode";
    case ErrorKind::SingleClassTraining: return "SingleClassTraining";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InvalidParams: return "InvalidParams";
    case ErrorKind::TooFewInstances: return "TooFewInstances";
    case ErrorKind::BadK: return "BadK";
    case ErrorKind::AllFoldsSkipped: return "AllFoldsSkipped";
    case ErrorKind::OneClassOnly: return "OneClassOnly";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type. `kind()` is
/// the stable, testable part; `what()` carries the human detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& detail) {
  throw Error(kind, detail);
}

}  // namespace respira
