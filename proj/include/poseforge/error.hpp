#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace poseforge {

enum class ErrorCode {
    KeypointCountMismatch,
    NonPositiveArea,
    InvalidVisibility,
    NonPositiveBBox,
    InvalidSkeleton,
    DuplicateIndexInFlipPairs,
    MalformedJson,
    MissingField,
    TripletLengthMismatch,
    DanglingImageId,
    ScoreOutOfRange,
    DegenerateSize,
    InvalidConfig,
    NoVisibleKeypoints,
    ImageIdMismatch,
    EmptyGroundTruth,
    SizeMismatch,
    ShapeMismatch,
    TimestepOutOfRange,
    InvalidRange,
    EmptyDataset,
    IoFailure,
    NumericFailure,
    InvalidFieldType,
};

const char* to_string(ErrorCode code);

/// Exception carrying a typed code, plus the offending record index or byte
/// position when one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what, std::optional<std::size_t> where = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), where_(where) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> where() const noexcept { return where_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> where_;
};

} // namespace poseforge
