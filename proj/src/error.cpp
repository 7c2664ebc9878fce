#include "iidlab/error.hpp"

namespace iid {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::UnsupportedBitDepth: return "UnsupportedBitDepth";
    case ErrorCode::DecodeFailure: return "DecodeFailure";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::LabelOverflow: return "LabelOverflow";
    case ErrorCode::MalformedSidecar: return "MalformedSidecar";
    case ErrorCode::DegenerateImage: return "DegenerateImage";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ManifestEmpty: return "ManifestEmpty";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::WindowLargerThanImage: return "WindowLargerThanImage";
    case ErrorCode::EmptyJudgments: return "EmptyJudgments";
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::BadInput: return "BadInput";
  }
  return "Unknown";
}

bool Error::is_input_error() const noexcept {
  switch (code_) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::MissingGrad:
      return false;
    default:
      return true;
  }
}

}  // namespace iid
