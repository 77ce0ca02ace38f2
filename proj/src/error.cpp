#include "outline_forge/error.hpp"

namespace outline_forge {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedJson: return "MalformedJson";
    case ErrorKind::DanglingReference: return "DanglingReference";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::AreaMismatch: return "AreaMismatch";
    case ErrorKind::BboxMismatch: return "BboxMismatch";
    case ErrorKind::RleLengthMismatch: return "RleLengthMismatch";
    case ErrorKind::DegeneratePolygon: return "DegeneratePolygon";
    case ErrorKind::Io: return "Io";
    case ErrorKind::EmptyClassName: return "EmptyClassName";
    case ErrorKind::InvalidPrompt: return "InvalidPrompt";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotDivisible: return "NotDivisible";
    case ErrorKind::InsufficientImages: return "InsufficientImages";
    case ErrorKind::BackendUnreachable: return "BackendUnreachable";
    case ErrorKind::BackendRejected: return "BackendRejected";
    case ErrorKind::ProtocolViolation: return "ProtocolViolation";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::FailureBudgetExceeded: return "FailureBudgetExceeded";
  }
  return "Unknown";
}

}  // namespace outline_forge
