#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace mtgpk {

enum class ErrorCode {
  NotSymmetric,
  NotPSD,
  NonPositiveDiagonal,
  ParseError,
  DimensionMismatch,
  NonFiniteValue,
  TaskIndexOutOfRange,
  NotPSDAfterJitter,
  EmptyTask,
  InvalidBounds,
  InvalidArgument,
  NegativeVariance,
  ConfigError,
  ResourceCapExceeded,
};

const char* error_code_name(ErrorCode code);

/// Library-wide exception carrying a machine-readable code; `detail` holds a
/// diagnostic value where one exists (e.g. the most negative eigenvalue).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<double> detail = std::nullopt)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const { return code_; }
  std::optional<double> detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::optional<double> detail_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg,
                               std::optional<double> detail = std::nullopt) {
  throw Error(code, msg, detail);
}

}  // namespace mtgpk
