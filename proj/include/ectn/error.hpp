#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ectn {

enum class ErrorCode {
  IndexOutOfRange,
  DuplicateCoordinate,
  NegativeValue,
  InvalidConfig,
  ExpansionNotOne,
  DimMismatch,
  NonFiniteAccumulator,
  EmptyTrainSet,
  MalformedLine,
  BadRatios,
  DensityTooHigh,
  EmptyEvalSet,
  EmptyInput,
  DegenerateTable,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateCoordinate: return "DuplicateCoordinate";
    case ErrorCode::NegativeValue: return "NegativeValue";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ExpansionNotOne: return "ExpansionNotOne";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::NonFiniteAccumulator: return "NonFiniteAccumulator";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::DensityTooHigh: return "DensityTooHigh";
    case ErrorCode::EmptyEvalSet: return "EmptyEvalSet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateTable: return "DegenerateTable";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace ectn
