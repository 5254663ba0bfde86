#include "mhaff/error.hpp"

namespace mhaff {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingKey: return "MissingKey";
    case ErrorCode::kInvalidValue: return "InvalidValue";
    case ErrorCode::kUnsupportedType: return "UnsupportedType";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kOutOfRangeHU: return "OutOfRangeHU";
    case ErrorCode::kDuplicateNodule: return "DuplicateNodule";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kNonFiniteTensor: return "NonFiniteTensor";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kOddSpatialDims: return "OddSpatialDims";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kNoValidPairs: return "NoValidPairs";
    case ErrorCode::kUnknownClass: return "UnknownClass";
    case ErrorCode::kSingleClassLabels: return "SingleClassLabels";
    case ErrorCode::kCategoryStarved: return "CategoryStarved";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
    case ErrorCode::kInvalidFeatureValue: return "InvalidFeatureValue";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kUnknownKey: return "UnknownKey";
    case ErrorCode::kEvenSliceCount: return "EvenSliceCount";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace mhaff
