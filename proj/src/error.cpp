#include "ctprep/error.hpp"

namespace ctprep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::RangeOverflow: return "RangeOverflow";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::ModalityMismatch: return "ModalityMismatch";
    case ErrorCode::OutOfRangeInput: return "OutOfRangeInput";
    case ErrorCode::EmptyForeground: return "EmptyForeground";
    case ErrorCode::DegenerateStats: return "DegenerateStats";
    case ErrorCode::SliceOutOfRange: return "SliceOutOfRange";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace ctprep
