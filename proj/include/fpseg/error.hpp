#pragma once

#include <stdexcept>
#include <string>

namespace fpseg {

enum class ErrorCode {
  InvalidDomain,
  InvalidWeight,
  InvalidArgument,
  OutOfRange,
  DomainMismatch,
  Infeasible,
  InternalConsistency,
  SizeGuard,
  Arity,
  Format,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidDomain: return "invalid-domain";
    case ErrorCode::InvalidWeight: return "invalid-weight";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::DomainMismatch: return "domain-mismatch";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::InternalConsistency: return "internal-consistency";
    case ErrorCode::SizeGuard: return "size-guard";
    case ErrorCode::Arity: return "arity";
    case ErrorCode::Format: return "format";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fpseg
