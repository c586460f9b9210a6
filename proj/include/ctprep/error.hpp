#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctprep {

enum class ErrorCode {
  UnsupportedDatatype,
  MalformedHeader,
  DimMismatch,
  RangeOverflow,
  IoFailure,
  InvalidWindow,
  GeometryMismatch,
  ModalityMismatch,
  OutOfRangeInput,
  EmptyForeground,
  DegenerateStats,
  SliceOutOfRange,
  MissingModality,
  MissingPrediction,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the batch runner can record it per subject without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ctprep
