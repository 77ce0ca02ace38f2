#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace outline_forge {

enum class ErrorKind {
  MalformedJson,
  DanglingReference,
  DimensionMismatch,
  AreaMismatch,
  BboxMismatch,
  RleLengthMismatch,
  DegeneratePolygon,
  Io,
  EmptyClassName,
  InvalidPrompt,
  InvalidArgument,
  NotDivisible,
  InsufficientImages,
  BackendUnreachable,
  BackendRejected,
  ProtocolViolation,
  PreconditionViolation,
  TooFewSamples,
  NumericalBreakdown,
  EmptyInput,
  NotNormalized,
  FailureBudgetExceeded,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace outline_forge
