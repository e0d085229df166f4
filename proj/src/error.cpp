#include "dbmc/error.hpp"

namespace dbmc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::config: return "configuration error";
    case ErrorCode::blow_up: return "numerical blow-up";
    case ErrorCode::io: return "I/O error";
    case ErrorCode::format: return "format error";
    case ErrorCode::checksum: return "checksum error";
    case ErrorCode::singular_covariance: return "singular covariance";
    case ErrorCode::unbounded: return "unbounded";
    case ErrorCode::degenerate_variance: return "degenerate variance";
  }
  return "unknown error";
}

}  // namespace dbmc
