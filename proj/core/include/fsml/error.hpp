#pragma once

#include <stdexcept>
#include <string>

namespace fsml {

enum class ErrorCode {
  kInvalidArgument,
  kFormat,
  kIo,
  kInsufficientData,
  kDimensionMismatch,
  kNumerical,
};

// All failures in the library surface as fsml::Error; the code lets callers
// (notably the CLI) distinguish bad input from I/O and numerical trouble.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fsml
