#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mhaff {

enum class ErrorCode {
  kMissingKey,
  kInvalidValue,
  kUnsupportedType,
  kSizeMismatch,
  kOutOfRangeHU,
  kDuplicateNodule,
  kBadMagic,
  kTruncated,
  kNonFiniteTensor,
  kShapeMismatch,
  kOddSpatialDims,
  kNonScalarLoss,
  kEmptyMask,
  kNoValidPairs,
  kUnknownClass,
  kSingleClassLabels,
  kCategoryStarved,
  kConfigMismatch,
  kInvalidFeatureValue,
  kEmptySplit,
  kLabelOutOfRange,
  kUnknownKey,
  kEvenSliceCount,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mhaff
