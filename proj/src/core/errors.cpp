#include "core/errors.hpp"

namespace dcur {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:     return "InvalidArgument";
    case ErrorCode::ParseError:          return "ParseError";
    case ErrorCode::MissingAsset:        return "MissingAsset";
    case ErrorCode::InconsistentTrack:   return "InconsistentTrack";
    case ErrorCode::PoleDegenerate:      return "PoleDegenerate";
    case ErrorCode::CoincidentCenters:   return "CoincidentCenters";
    case ErrorCode::NumericallySingular: return "NumericallySingular";
    case ErrorCode::SingularHomography:  return "SingularHomography";
    case ErrorCode::DegenerateBox:       return "DegenerateBox";
    case ErrorCode::EmptyForeground:     return "EmptyForeground";
    case ErrorCode::ShapeMismatch:       return "ShapeMismatch";
    case ErrorCode::BatchTooSmall:       return "BatchTooSmall";
    case ErrorCode::DivergedLoss:        return "DivergedLoss";
    case ErrorCode::EmptyValidRegion:    return "EmptyValidRegion";
    case ErrorCode::IoError:             return "IoError";
    case ErrorCode::VersionMismatch:     return "VersionMismatch";
    case ErrorCode::NoUsableFrames:      return "NoUsableFrames";
    case ErrorCode::InvalidConfig:       return "InvalidConfig";
    case ErrorCode::Internal:            return "Internal";
  }
  return "Internal";
}

}  // namespace dcur
