#pragma once

#include <stdexcept>
#include <string>

namespace rezero {

enum class ErrorCode {
  kInvalidState,
  kInvalidAction,
  kContractViolation,
  kPrecondition,
  kDomain,
  kStaleTargets,
  kConfig,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const char* message) {
  if (!condition) fail(code, message);
}

}  // namespace rezero
