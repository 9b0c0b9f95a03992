#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "poseforge/core.hpp"

namespace poseforge {

struct ImageRecord {
    long long id = 0;
    std::string file_name;
    int width = 0;
    int height = 0;

    bool operator==(const ImageRecord&) const = default;
};

struct Category {
    long long id = 1;
    std::string name = "person";
    std::vector<std::string> keypoints;
    std::vector<IndexPair> skeleton; // 1-based, as in COCO files

    bool operator==(const Category&) const = default;
};

/// Ground-truth keypoint annotations. PersonInstance::score is unused here.
struct AnnotationFile {
    std::vector<ImageRecord> images;
    std::vector<PersonInstance> annotations;
    std::vector<Category> categories;

    const ImageRecord* find_image(long long image_id) const;
    bool operator==(const AnnotationFile&) const = default;
};

struct Detection {
    long long image_id = 0;
    BBox bbox;
    double score = 0.0;
    long long category_id = 1;

    bool operator==(const Detection&) const = default;
};

struct DetectionFile {
    std::vector<Detection> detections;

    /// Detections keyed by image id, each group in file order.
    std::map<long long, std::vector<Detection>> grouped_by_image() const;
    bool operator==(const DetectionFile&) const = default;
};

struct KeypointResult {
    long long image_id = 0;
    long long category_id = 1;
    std::vector<double> keypoints; // flat (x, y, v) triplets
    double score = 0.0;

    bool operator==(const KeypointResult&) const = default;
};

struct ResultFile {
    std::vector<KeypointResult> results;

    bool operator==(const ResultFile&) const = default;
};

// Flat 3K layout conversions. from_triplets throws TripletLengthMismatch.
std::vector<double> to_triplets(const std::vector<Keypoint>& kps);
std::vector<Keypoint> from_triplets(const std::vector<double>& flat, int K, std::size_t record = 0);

/// Result entry to a prediction instance (bbox and area are taken from the
/// keypoint extent; the evaluator only uses keypoints and score).
PersonInstance result_to_instance(const KeypointResult& r, int K);
KeypointResult instance_to_result(const PersonInstance& inst, long long category_id = 1);

AnnotationFile parse_annotations(std::string_view bytes, const SkeletonSpec& spec);
std::string write_annotations(const AnnotationFile& file);

DetectionFile parse_detections(std::string_view bytes);
std::string write_detections(const DetectionFile& file);

ResultFile parse_results(std::string_view bytes, const SkeletonSpec& spec);
std::string write_results(const ResultFile& results);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

} // namespace poseforge
