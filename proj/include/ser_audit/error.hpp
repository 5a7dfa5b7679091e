#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ser_audit {

enum class ErrorCode {
  kRange,
  kParse,
  kDuplicate,
  kEmptySelection,
  kUnsupportedFormat,
  kIo,
  kInvalidLength,
  kDegenerateInput,
  kDesign,
  kShape,
  kEmptyGroup,
  kDegenerateSpeaker,
  kDivergence,
  kMissingPrediction,
  kProtocol,
  kIncompatiblePredictor,
  kBrokenSession,
  kInvalidArgument,
};

std::string_view ErrorCodeName(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kRange: return "range error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kDuplicate: return "duplicate error";
    case ErrorCode::kEmptySelection: return "empty selection";
    case ErrorCode::kUnsupportedFormat: return "unsupported format";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kInvalidLength: return "invalid length";
    case ErrorCode::kDegenerateInput: return "degenerate input";
    case ErrorCode::kDesign: return "filter design error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kEmptyGroup: return "empty group";
    case ErrorCode::kDegenerateSpeaker: return "degenerate speaker";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kMissingPrediction: return "missing prediction";
    case ErrorCode::kProtocol: return "protocol error";
    case ErrorCode::kIncompatiblePredictor: return "incompatible predictor";
    case ErrorCode::kBrokenSession: return "broken session";
    case ErrorCode::kInvalidArgument: return "invalid argument";
  }
  return "error";
}

}  // namespace ser_audit
