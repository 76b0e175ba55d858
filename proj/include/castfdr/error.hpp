#pragma once

#include <stdexcept>
#include <string>

namespace cast {

// Every failure the library can signal carries one of these kinds so callers
// (and the command line front end) can report it by name.
enum class ErrorKind {
  EmptyInput,
  DuplicateFeature,
  PValueOutOfRange,
  UnsortedInput,
  EmptyIdentifier,
  MissingCorrelation,
  FallbackTriggered,
  DegenerateSamples,
  InfeasiblePartition,
  InfeasibleSignalCounts,
  ComponentTooLarge,
  CountInconsistency,
  TooFewReplicates,
  ParseError,
  SubjectMismatch,
  IoError,
  InvalidArgument,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when a correlation-adjusted factor is undefined at the extreme mean
// correlation of -1; callers substitute the unadjusted harmonic factor.
class FallbackTriggered : public Error {
 public:
  explicit FallbackTriggered(const std::string& message)
      : Error(ErrorKind::FallbackTriggered, message) {}
};

}  // namespace cast
