#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "poseforge/error.hpp"

namespace poseforge {

using IndexPair = std::pair<int, int>;

/// Keypoint layout of a skeleton: names, left/right flip pairs, OKS falloff
/// constants and the edges used for rendering.
struct SkeletonSpec {
    std::string name;
    int K = 0;
    std::vector<std::string> keypoint_names;
    std::vector<IndexPair> flip_pairs;
    std::vector<double> oks_k;
    std::vector<IndexPair> skeleton_edges;
    // Half-body augmentation split. Indices not listed in either are ignored.
    std::vector<int> upper_body;
    std::vector<int> lower_body;

    bool operator==(const SkeletonSpec&) const = default;
};

/// Throws InvalidSkeleton or DuplicateIndexInFlipPairs.
void validate_skeleton(const SkeletonSpec& spec);

/// Standard COCO 17-keypoint layout. The OKS constants are the COCO sigmas
/// doubled, so that exp(-d^2 / (2 s^2 k^2)) matches the official evaluator.
SkeletonSpec coco17_skeleton();

SkeletonSpec skeleton_from_json(const std::string& text);
std::string skeleton_to_json(const SkeletonSpec& spec);
SkeletonSpec load_skeleton(const std::string& path);

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    int v = 0; // 0 unlabeled, 1 labeled-occluded, 2 labeled-visible

    bool operator==(const Keypoint&) const = default;
};

struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 1.0;
    double h = 1.0;

    bool operator==(const BBox&) const = default;
};

struct PersonInstance {
    std::vector<Keypoint> keypoints;
    BBox bbox;
    double area = 1.0;
    double score = 1.0;
    long long image_id = 0;
    long long id = 0;
    bool iscrowd = false;

    int num_labeled() const;
    bool operator==(const PersonInstance&) const = default;
};

/// Throws KeypointCountMismatch, NonPositiveArea, InvalidVisibility or
/// NonPositiveBBox.
void validate_instance(const PersonInstance& inst, const SkeletonSpec& spec);

/// Involutive permutation swapping each flip pair. Throws
/// DuplicateIndexInFlipPairs or InvalidSkeleton on bad pairs.
std::vector<int> flip_index_map(const SkeletonSpec& spec);

} // namespace poseforge
