#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskmmse {

enum class ErrorCode {
  UnknownKind,
  InvalidParameter,
  UnsupportedKind,
  ZeroPosteriorMass,
  QuadratureNotConverged,
  NegativeMu,
  NegativeRisk,
  MultiplierCapExceeded,
  GridTooCoarse,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above; the CLI
/// prints `error_name(code())` so scripts can match on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace riskmmse
