#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace otalign {

enum class ErrorCode {
  MalformedInput,
  CalendarGap,
  DegenerateEmbedding,
  SchemaError,
  NormError,
  IncompleteBundle,
  NumericalError,
  OracleTooLarge,
  ParameterError,
  SingularSystem,
  InsufficientData,
  DataError,
  UndefinedSharpe,
  ConfigError,
  StageDependencyError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::CalendarGap: return "CalendarGap";
    case ErrorCode::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::NormError: return "NormError";
    case ErrorCode::IncompleteBundle: return "IncompleteBundle";
    case ErrorCode::NumericalError: return "NumericalError";
    case ErrorCode::OracleTooLarge: return "OracleTooLarge";
    case ErrorCode::ParameterError: return "ParameterError";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DataError: return "DataError";
    case ErrorCode::UndefinedSharpe: return "UndefinedSharpe";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::StageDependencyError: return "StageDependencyError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace otalign
