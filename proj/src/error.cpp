#include "sigat/error.hpp"

namespace sigat {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidConfig: return "invalid_config";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kNumeric: return "numeric";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kUnsupportedVersion: return "unsupported_version";
    case ErrorCode::kInsufficientNodes: return "insufficient_nodes";
    case ErrorCode::kInsufficientClass: return "insufficient_class";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kDeterminism: return "determinism";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kDegenerateAxis: return "degenerate_axis";
  }
  return "unknown";
}

}  // namespace sigat
