#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace entropyspc {

enum class ErrorKind {
  MalformedCsv,
  InconsistentDesign,
  EmptyDataset,
  UnknownSample,
  DegenerateDesign,
  InvalidConstraints,
  Infeasible,
  NoConvergence,
  DivergentIntegral,
  QuadratureError,
  ZeroVariance,
  SingularCovariance,
  TooFewSamples,
  InvalidDof,
  EmptyInput,
  BaselineMismatch,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedCsv: return "MalformedCsv";
    case ErrorKind::InconsistentDesign: return "InconsistentDesign";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnknownSample: return "UnknownSample";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::InvalidConstraints: return "InvalidConstraints";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DivergentIntegral: return "DivergentIntegral";
    case ErrorKind::QuadratureError: return "QuadratureError";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::SingularCovariance: return "SingularCovariance";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::InvalidDof: return "InvalidDof";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::BaselineMismatch: return "BaselineMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace entropyspc
