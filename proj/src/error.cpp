#include "poseforge/error.hpp"

namespace poseforge {

const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::KeypointCountMismatch: return "KeypointCountMismatch";
    case ErrorCode::NonPositiveArea: return "NonPositiveArea";
    case ErrorCode::InvalidVisibility: return "InvalidVisibility";
    case ErrorCode::NonPositiveBBox: return "NonPositiveBBox";
    case ErrorCode::InvalidSkeleton: return "InvalidSkeleton";
    case ErrorCode::DuplicateIndexInFlipPairs: return "DuplicateIndexInFlipPairs";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::TripletLengthMismatch: return "TripletLengthMismatch";
    case ErrorCode::DanglingImageId: return "DanglingImageId";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::DegenerateSize: return "DegenerateSize";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoVisibleKeypoints: return "NoVisibleKeypoints";
    case ErrorCode::ImageIdMismatch: return "ImageIdMismatch";
    case ErrorCode::EmptyGroundTruth: return "EmptyGroundTruth";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TimestepOutOfRange: return "TimestepOutOfRange";
    case ErrorCode::InvalidRange: return "InvalidRange";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NumericFailure: return "NumericFailure";
    case ErrorCode::InvalidFieldType: return "InvalidFieldType";
    }
    return "Unknown";
}

} // namespace poseforge
