#include "rezero/errors.h"

namespace rezero {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kInvalidAction: return "invalid-action";
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kPrecondition: return "precondition";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kStaleTargets: return "stale-targets";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace rezero
