#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iid {

enum class ErrorCode {
  MissingFile,
  UnsupportedBitDepth,
  DecodeFailure,
  IoFailure,
  HeaderMismatch,
  TruncatedPayload,
  LabelOverflow,
  MalformedSidecar,
  DegenerateImage,
  ShapeMismatch,
  SizeMismatch,
  DegenerateBatch,
  MissingGrad,
  InvalidConfig,
  ManifestEmpty,
  NonFiniteLoss,
  WindowLargerThanImage,
  EmptyJudgments,
  ZeroTotalWeight,
  CheckpointMismatch,
  EmptySplit,
  BadInput,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a stable machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for errors caused by user input rather than an internal defect.
  bool is_input_error() const noexcept;

 private:
  ErrorCode code_;
};

}  // namespace iid
