#include "poseforge/core.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace poseforge {

using nlohmann::json;

void validate_skeleton(const SkeletonSpec& spec) {
    if (spec.K <= 0)
        throw Error(ErrorCode::InvalidSkeleton, "K must be positive");
    if (!spec.keypoint_names.empty() && static_cast<int>(spec.keypoint_names.size()) != spec.K)
        throw Error(ErrorCode::InvalidSkeleton, "keypoint_names length differs from K");
    if (static_cast<int>(spec.oks_k.size()) != spec.K)
        throw Error(ErrorCode::InvalidSkeleton, "oks_k length differs from K");
    for (std::size_t i = 0; i < spec.oks_k.size(); ++i) {
        if (!(spec.oks_k[i] > 0.0))
            throw Error(ErrorCode::InvalidSkeleton, "oks_k[" + std::to_string(i) + "] must be positive", i);
    }
    auto in_range = [&](int i) { return i >= 0 && i < spec.K; };
    for (std::size_t e = 0; e < spec.skeleton_edges.size(); ++e) {
        const auto& [a, b] = spec.skeleton_edges[e];
        if (!in_range(a) || !in_range(b))
            throw Error(ErrorCode::InvalidSkeleton, "skeleton_edges[" + std::to_string(e) + "] out of range", e);
    }
    for (int i : spec.upper_body)
        if (!in_range(i)) throw Error(ErrorCode::InvalidSkeleton, "upper_body index out of range");
    for (int i : spec.lower_body)
        if (!in_range(i)) throw Error(ErrorCode::InvalidSkeleton, "lower_body index out of range");
    flip_index_map(spec);
}

std::vector<int> flip_index_map(const SkeletonSpec& spec) {
    std::vector<int> perm(static_cast<std::size_t>(spec.K));
    for (int i = 0; i < spec.K; ++i) perm[i] = i;
    std::vector<bool> used(perm.size(), false);
    for (std::size_t p = 0; p < spec.flip_pairs.size(); ++p) {
        const auto& [a, b] = spec.flip_pairs[p];
        if (a < 0 || b < 0 || a >= spec.K || b >= spec.K || a == b)
            throw Error(ErrorCode::InvalidSkeleton, "flip_pairs[" + std::to_string(p) + "] invalid", p);
        if (used[a] || used[b])
            throw Error(ErrorCode::DuplicateIndexInFlipPairs, "flip_pairs[" + std::to_string(p) + "] reuses an index", p);
        used[a] = used[b] = true;
        perm[a] = b;
        perm[b] = a;
    }
    return perm;
}

SkeletonSpec coco17_skeleton() {
    SkeletonSpec s;
    s.name = "coco17";
    s.K = 17;
    s.keypoint_names = {"nose",           "left_eye",       "right_eye",   "left_ear",    "right_ear",
                        "left_shoulder",  "right_shoulder", "left_elbow",  "right_elbow", "left_wrist",
                        "right_wrist",    "left_hip",       "right_hip",   "left_knee",   "right_knee",
                        "left_ankle",     "right_ankle"};
    s.flip_pairs = {{1, 2}, {3, 4}, {5, 6}, {7, 8}, {9, 10}, {11, 12}, {13, 14}, {15, 16}};
    s.oks_k = {0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
               0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
    s.skeleton_edges = {{15, 13}, {13, 11}, {16, 14}, {14, 12}, {11, 12}, {5, 11}, {6, 12},
                        {5, 6},   {5, 7},   {6, 8},   {7, 9},   {8, 10},  {1, 2},  {0, 1},
                        {0, 2},   {1, 3},   {2, 4},   {3, 5},   {4, 6}};
    s.upper_body = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    s.lower_body = {11, 12, 13, 14, 15, 16};
    return s;
}

namespace {

std::vector<IndexPair> pairs_from(const json& j, const char* field) {
    std::vector<IndexPair> out;
    if (!j.contains(field)) return out;
    for (const auto& p : j.at(field)) {
        if (!p.is_array() || p.size() != 2)
            throw Error(ErrorCode::InvalidSkeleton, std::string(field) + " entries must be pairs");
        out.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    return out;
}

json pairs_to(const std::vector<IndexPair>& pairs) {
    json out = json::array();
    for (const auto& [a, b] : pairs) out.push_back({a, b});
    return out;
}

} // namespace

SkeletonSpec skeleton_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, e.what(), e.byte);
    }
    SkeletonSpec s;
    try {
        for (const char* f : {"name", "K", "oks_k"})
            if (!j.contains(f)) throw Error(ErrorCode::MissingField, f);
        s.name = j.at("name").get<std::string>();
        s.K = j.at("K").get<int>();
        s.keypoint_names = j.value("keypoint_names", std::vector<std::string>{});
        s.oks_k = j.at("oks_k").get<std::vector<double>>();
        s.flip_pairs = pairs_from(j, "flip_pairs");
        s.skeleton_edges = pairs_from(j, "skeleton_edges");
        s.upper_body = j.value("upper_body", std::vector<int>{});
        s.lower_body = j.value("lower_body", std::vector<int>{});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSkeleton, e.what());
    }
    validate_skeleton(s);
    return s;
}

std::string skeleton_to_json(const SkeletonSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["K"] = spec.K;
    j["keypoint_names"] = spec.keypoint_names;
    j["flip_pairs"] = pairs_to(spec.flip_pairs);
    j["oks_k"] = spec.oks_k;
    j["skeleton_edges"] = pairs_to(spec.skeleton_edges);
    j["upper_body"] = spec.upper_body;
    j["lower_body"] = spec.lower_body;
    return j.dump(2) + "\n";
}

SkeletonSpec load_skeleton(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return skeleton_from_json(ss.str());
}

int PersonInstance::num_labeled() const {
    int n = 0;
    for (const auto& kp : keypoints) n += kp.v > 0 ? 1 : 0;
    return n;
}

void validate_instance(const PersonInstance& inst, const SkeletonSpec& spec) {
    if (static_cast<int>(inst.keypoints.size()) != spec.K)
        throw Error(ErrorCode::KeypointCountMismatch,
                    "keypoints has " + std::to_string(inst.keypoints.size()) + " entries, expected " +
                        std::to_string(spec.K));
    if (!(inst.area > 0.0))
        throw Error(ErrorCode::NonPositiveArea, "area must be > 0");
    if (!(inst.bbox.w > 0.0) || !(inst.bbox.h > 0.0))
        throw Error(ErrorCode::NonPositiveBBox, "bbox w and h must be > 0");
    for (std::size_t i = 0; i < inst.keypoints.size(); ++i) {
        const int v = inst.keypoints[i].v;
        if (v < 0 || v > 2)
            throw Error(ErrorCode::InvalidVisibility, "keypoints[" + std::to_string(i) + "].v = " + std::to_string(v), i);
    }
}

} // namespace poseforge
