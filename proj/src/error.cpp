#include "riskmmse/error.hpp"

namespace riskmmse {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnsupportedKind: return "UnsupportedKind";
    case ErrorCode::ZeroPosteriorMass: return "ZeroPosteriorMass";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::NegativeMu: return "NegativeMu";
    case ErrorCode::NegativeRisk: return "NegativeRisk";
    case ErrorCode::MultiplierCapExceeded: return "MultiplierCapExceeded";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

}  // namespace riskmmse
