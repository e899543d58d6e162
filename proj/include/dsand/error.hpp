#pragma once

#include <stdexcept>
#include <string>

namespace dsand {

/// Error categories shared by the C++ core and the C API status codes.
enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Format = 3,
  InvalidSpectrum = 4,
  MassMismatch = 5,
  BoxTooSmall = 6,
  NotConverged = 7,
  Validation = 8,
  RadiusCap = 9,
  Internal = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace dsand
