#include "mtgpk/errors.hpp"

namespace mtgpk {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotSymmetric:
      return "NotSymmetric";
    case ErrorCode::NotPSD:
      return "NotPSD";
    case ErrorCode::NonPositiveDiagonal:
      return "NonPositiveDiagonal";
    case ErrorCode::ParseError:
      return "ParseError";
    case ErrorCode::DimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::NonFiniteValue:
      return "NonFiniteValue";
    case ErrorCode::TaskIndexOutOfRange:
      return "TaskIndexOutOfRange";
    case ErrorCode::NotPSDAfterJitter:
      return "NotPSDAfterJitter";
    case ErrorCode::EmptyTask:
      return "EmptyTask";
    case ErrorCode::InvalidBounds:
      return "InvalidBounds";
    case ErrorCode::InvalidArgument:
      return "InvalidArgument";
    case ErrorCode::NegativeVariance:
      return "NegativeVariance";
    case ErrorCode::ConfigError:
      return "ConfigError";
    case ErrorCode::ResourceCapExceeded:
      return "ResourceCapExceeded";
  }
  return "UnknownError";
}

}  // namespace mtgpk
