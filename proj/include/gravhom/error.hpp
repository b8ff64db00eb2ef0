#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gravhom {

// Machine-readable failure categories. The CLI prints these verbatim.
enum class ErrorCode {
  kNoRealRoot,
  kNormalizationFailure,
  kZeroTranslation,
  kDegenerateInput,
  kDegenerateConfiguration,
  kNoSolution,
  kEliminationFailure,
  kPrecondition,
  kInsufficientData,
  kNoModelFound,
  kGenerationFailure,
  kParse,
  kValidation,
  kSchema,
  kUsage,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNoRealRoot: return "NoRealRoot";
    case ErrorCode::kNormalizationFailure: return "NormalizationFailure";
    case ErrorCode::kZeroTranslation: return "ZeroTranslation";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kNoSolution: return "NoSolution";
    case ErrorCode::kEliminationFailure: return "EliminationFailure";
    case ErrorCode::kPrecondition: return "PreconditionViolated";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kNoModelFound: return "NoModelFound";
    case ErrorCode::kGenerationFailure: return "GenerationFailure";
    case ErrorCode::kParse: return "ParseError";
    case ErrorCode::kValidation: return "ValidationError";
    case ErrorCode::kSchema: return "SchemaError";
    case ErrorCode::kUsage: return "UsageError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gravhom
