#include "castfdr/error.hpp"

namespace cast {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::DuplicateFeature: return "DuplicateFeature";
    case ErrorKind::PValueOutOfRange: return "PValueOutOfRange";
    case ErrorKind::UnsortedInput: return "UnsortedInput";
    case ErrorKind::EmptyIdentifier: return "EmptyIdentifier";
    case ErrorKind::MissingCorrelation: return "MissingCorrelation";
    case ErrorKind::FallbackTriggered: return "FallbackTriggered";
    case ErrorKind::DegenerateSamples: return "DegenerateSamples";
    case ErrorKind::InfeasiblePartition: return "InfeasiblePartition";
    case ErrorKind::InfeasibleSignalCounts: return "InfeasibleSignalCounts";
    case ErrorKind::ComponentTooLarge: return "ComponentTooLarge";
    case ErrorKind::CountInconsistency: return "CountInconsistency";
    case ErrorKind::TooFewReplicates: return "TooFewReplicates";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SubjectMismatch: return "SubjectMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace cast
