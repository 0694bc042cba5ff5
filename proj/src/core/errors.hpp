#pragma once

#include <stdexcept>
#include <string>

namespace dcur {

// Error taxonomy shared by the whole pipeline. The C API maps these 1:1 to
// status codes; the CLI prints the name as the machine-parseable category.
enum class ErrorCode {
  InvalidArgument,
  ParseError,
  MissingAsset,
  InconsistentTrack,
  PoleDegenerate,
  CoincidentCenters,
  NumericallySingular,
  SingularHomography,
  DegenerateBox,
  EmptyForeground,
  ShapeMismatch,
  BatchTooSmall,
  DivergedLoss,
  EmptyValidRegion,
  IoError,
  VersionMismatch,
  NoUsableFrames,
  InvalidConfig,
  Internal,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace dcur
