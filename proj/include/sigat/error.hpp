#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sigat {

// Every failure raised by the library carries one of these codes. The CLI
// maps them onto distinct process exit codes.
enum class ErrorCode {
  kInvalidConfig = 2,
  kShape = 3,
  kNumeric = 4,
  kParse = 5,
  kUnsupportedVersion = 6,
  kInsufficientNodes = 7,
  kInsufficientClass = 8,
  kContract = 9,
  kDeterminism = 10,
  kIo = 11,
  kDegenerateAxis = 12,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace sigat
