#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace backgen {

enum class ErrorKind {
  UnmatchedBrackets,
  EmptyNode,
  BadToken,
  NotAConstituent,
  EmptySentence,
  IndexOutOfRange,
  YieldMismatch,
  NonFiniteGradient,
  NonFiniteLoss,
  EmptyTreebank,
  ZeroNormVector,
  NoPositives,
  LengthMismatch,
  EndpointUnreachable,
  RateLimited,
  BadConfig,
  BadCheckpoint,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnmatchedBrackets: return "UnmatchedBrackets";
    case ErrorKind::EmptyNode: return "EmptyNode";
    case ErrorKind::BadToken: return "BadToken";
    case ErrorKind::NotAConstituent: return "NotAConstituent";
    case ErrorKind::EmptySentence: return "EmptySentence";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::YieldMismatch: return "YieldMismatch";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::EmptyTreebank: return "EmptyTreebank";
    case ErrorKind::ZeroNormVector: return "ZeroNormVector";
    case ErrorKind::NoPositives: return "NoPositives";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorKind::RateLimited: return "RateLimited";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// All toolkit failures are reported as Error; kind() identifies the contract
/// violation, what() carries the locus.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace backgen
