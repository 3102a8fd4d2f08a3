#pragma once

#include <stdexcept>
#include <string>

namespace fairgraph {

// Base of every error raised by the library. Callers that only care about
// "something went wrong" catch this; the subclasses let the CLI map
// failures onto exit codes and let tests assert on the precise failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class TapeError : public Error { using Error::Error; };

// graph
class UndefinedRatioError : public Error { using Error::Error; };
class DegenerateEditError : public Error { using Error::Error; };
class DivisionByZeroError : public Error { using Error::Error; };
class InfeasibleError : public Error { using Error::Error; };
class InvalidTargetError : public Error { using Error::Error; };
class ResourceLimitError : public Error { using Error::Error; };

// losses / metrics
class EmptyInputError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class UndefinedMetricError : public Error { using Error::Error; };

// data
class ParseError : public Error { using Error::Error; };
class MissingColumnError : public Error { using Error::Error; };
class NonBinarySensitiveError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

// pipeline
class ConfigError : public Error { using Error::Error; };
class DivergenceError : public Error { using Error::Error; };

}  // namespace fairgraph
