#pragma once

#include <stdexcept>
#include <string>

namespace rtgam {

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  Data = 4,
  Numeric = 5,
  Internal = 6,
};

// All library failures are reported through this exception; the C API maps
// code() onto rtgam_status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rtgam
