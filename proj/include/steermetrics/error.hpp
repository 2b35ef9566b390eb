#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace steermetrics {

enum class ErrorCode {
  UnreadableSource,
  UnknownFormat,
  EmptyDrive,
  EmptyWindow,
  TooShort,
  WindowTooShort,
  DegenerateBaseline,
  InvalidAlpha,
  InvalidCutoff,
  ZeroVariance,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnreadableSource: return "UnreadableSource";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::EmptyDrive: return "EmptyDrive";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidCutoff: return "InvalidCutoff";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace steermetrics
