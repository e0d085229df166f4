#pragma once

#include <stdexcept>
#include <string>

namespace dbmc {

enum class ErrorCode {
  invalid_argument,
  config,
  blow_up,
  io,
  format,
  checksum,
  singular_covariance,
  unbounded,
  degenerate_variance,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a code so that callers (and the
// C API) can dispatch on the kind without a class hierarchy.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  // Same code, message prefixed with context (e.g. "macro 3: ...").
  Error with_context(const std::string& context) const {
    return Error(code_, context + ": " + what());
  }

 private:
  ErrorCode code_;
};

}  // namespace dbmc
