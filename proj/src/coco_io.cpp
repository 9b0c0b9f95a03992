#include "poseforge/coco_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace poseforge {

using nlohmann::json;

namespace {

json parse_json(std::string_view bytes) {
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, e.what(), e.byte);
    }
}

std::string where(const char* section, std::size_t record) {
    return std::string(section) + "[" + std::to_string(record) + "]";
}

const json& field(const json& obj, const char* name, const char* section, std::size_t record) {
    if (!obj.is_object())
        throw Error(ErrorCode::InvalidFieldType, where(section, record) + " is not an object", record);
    auto it = obj.find(name);
    if (it == obj.end())
        throw Error(ErrorCode::MissingField, where(section, record) + "." + name, record);
    return *it;
}

double number(const json& obj, const char* name, const char* section, std::size_t record) {
    const json& v = field(obj, name, section, record);
    if (!v.is_number())
        throw Error(ErrorCode::InvalidFieldType, where(section, record) + "." + name + " is not a number", record);
    return v.get<double>();
}

long long integer(const json& obj, const char* name, const char* section, std::size_t record) {
    const json& v = field(obj, name, section, record);
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 9e15) return static_cast<long long>(d);
    }
    throw Error(ErrorCode::InvalidFieldType, where(section, record) + "." + name + " is not an integer", record);
}

const json& array(const json& obj, const char* name, const char* section, std::size_t record) {
    const json& v = field(obj, name, section, record);
    if (!v.is_array())
        throw Error(ErrorCode::InvalidFieldType, where(section, record) + "." + name + " is not an array", record);
    return v;
}

std::vector<double> numbers(const json& arr, const char* section, std::size_t record) {
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number())
            throw Error(ErrorCode::InvalidFieldType, where(section, record) + " holds a non-number", record);
        out.push_back(v.get<double>());
    }
    return out;
}

BBox bbox_of(const json& obj, const char* section, std::size_t record) {
    auto b = numbers(array(obj, "bbox", section, record), section, record);
    if (b.size() != 4)
        throw Error(ErrorCode::InvalidFieldType, where(section, record) + ".bbox must have 4 numbers", record);
    return {b[0], b[1], b[2], b[3]};
}

json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

const json& top_array(const json& root, const char* name) {
    if (!root.is_object()) throw Error(ErrorCode::InvalidFieldType, "document root is not an object");
    auto it = root.find(name);
    if (it == root.end()) throw Error(ErrorCode::MissingField, name);
    if (!it->is_array()) throw Error(ErrorCode::InvalidFieldType, std::string(name) + " is not an array");
    return *it;
}

json keypoint_triplets_json(const std::vector<Keypoint>& kps) {
    json out = json::array();
    for (const auto& kp : kps) {
        out.push_back(kp.x);
        out.push_back(kp.y);
        out.push_back(kp.v);
    }
    return out;
}

} // namespace

std::vector<double> to_triplets(const std::vector<Keypoint>& kps) {
    std::vector<double> flat;
    flat.reserve(kps.size() * 3);
    for (const auto& kp : kps) {
        flat.push_back(kp.x);
        flat.push_back(kp.y);
        flat.push_back(static_cast<double>(kp.v));
    }
    return flat;
}

std::vector<Keypoint> from_triplets(const std::vector<double>& flat, int K, std::size_t record) {
    if (flat.size() != static_cast<std::size_t>(3 * K))
        throw Error(ErrorCode::TripletLengthMismatch,
                    "record " + std::to_string(record) + " has " + std::to_string(flat.size()) +
                        " keypoint numbers, expected " + std::to_string(3 * K),
                    record);
    std::vector<Keypoint> kps(static_cast<std::size_t>(K));
    for (int i = 0; i < K; ++i) {
        const double v = flat[3 * i + 2];
        if (v != 0.0 && v != 1.0 && v != 2.0)
            throw Error(ErrorCode::InvalidVisibility,
                        "record " + std::to_string(record) + " keypoint " + std::to_string(i) + " visibility", record);
        kps[i] = {flat[3 * i], flat[3 * i + 1], static_cast<int>(v)};
    }
    return kps;
}

PersonInstance result_to_instance(const KeypointResult& r, int K) {
    if (r.keypoints.size() != static_cast<std::size_t>(3 * K))
        throw Error(ErrorCode::TripletLengthMismatch, "result keypoints length");
    PersonInstance inst;
    inst.image_id = r.image_id;
    inst.score = r.score;
    inst.keypoints.resize(static_cast<std::size_t>(K));
    double x0 = r.keypoints[0], x1 = x0, y0 = r.keypoints[1], y1 = y0;
    for (int i = 0; i < K; ++i) {
        // The third entry of a result triplet is a confidence, not a flag.
        inst.keypoints[i] = {r.keypoints[3 * i], r.keypoints[3 * i + 1], 2};
        x0 = std::min(x0, inst.keypoints[i].x);
        x1 = std::max(x1, inst.keypoints[i].x);
        y0 = std::min(y0, inst.keypoints[i].y);
        y1 = std::max(y1, inst.keypoints[i].y);
    }
    inst.bbox = {x0, y0, std::max(x1 - x0, 1.0), std::max(y1 - y0, 1.0)};
    inst.area = inst.bbox.w * inst.bbox.h;
    return inst;
}

KeypointResult instance_to_result(const PersonInstance& inst, long long category_id) {
    KeypointResult r;
    r.image_id = inst.image_id;
    r.category_id = category_id;
    r.score = inst.score;
    r.keypoints = to_triplets(inst.keypoints);
    return r;
}

const ImageRecord* AnnotationFile::find_image(long long image_id) const {
    for (const auto& im : images)
        if (im.id == image_id) return &im;
    return nullptr;
}

AnnotationFile parse_annotations(std::string_view bytes, const SkeletonSpec& spec) {
    const json root = parse_json(bytes);
    AnnotationFile out;

    const json& images = top_array(root, "images");
    std::set<long long> ids;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const json& im = images[i];
        ImageRecord rec;
        rec.id = integer(im, "id", "images", i);
        const json& fn = field(im, "file_name", "images", i);
        if (!fn.is_string()) throw Error(ErrorCode::InvalidFieldType, where("images", i) + ".file_name", i);
        rec.file_name = fn.get<std::string>();
        rec.width = static_cast<int>(integer(im, "width", "images", i));
        rec.height = static_cast<int>(integer(im, "height", "images", i));
        ids.insert(rec.id);
        out.images.push_back(std::move(rec));
    }

    const json& anns = top_array(root, "annotations");
    for (std::size_t i = 0; i < anns.size(); ++i) {
        const json& a = anns[i];
        PersonInstance inst;
        inst.id = integer(a, "id", "annotations", i);
        inst.image_id = integer(a, "image_id", "annotations", i);
        inst.keypoints = from_triplets(numbers(array(a, "keypoints", "annotations", i), "annotations", i), spec.K, i);
        inst.bbox = bbox_of(a, "annotations", i);
        inst.area = number(a, "area", "annotations", i);
        inst.score = 1.0;
        if (a.contains("iscrowd")) inst.iscrowd = integer(a, "iscrowd", "annotations", i) != 0;
        if (!ids.count(inst.image_id))
            throw Error(ErrorCode::DanglingImageId,
                        where("annotations", i) + " references image " + std::to_string(inst.image_id), i);
        try {
            validate_instance(inst, spec);
        } catch (const Error& e) {
            throw Error(e.code(), where("annotations", i) + ": " + e.what(), i);
        }
        out.annotations.push_back(std::move(inst));
    }

    if (root.contains("categories")) {
        const json& cats = top_array(root, "categories");
        for (std::size_t i = 0; i < cats.size(); ++i) {
            const json& c = cats[i];
            Category cat;
            cat.id = integer(c, "id", "categories", i);
            if (c.contains("name") && c["name"].is_string()) cat.name = c["name"].get<std::string>();
            if (c.contains("keypoints") && c["keypoints"].is_array())
                for (const auto& n : c["keypoints"])
                    if (n.is_string()) cat.keypoints.push_back(n.get<std::string>());
            if (c.contains("skeleton") && c["skeleton"].is_array()) {
                for (const auto& e : c["skeleton"]) {
                    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
                        throw Error(ErrorCode::InvalidFieldType, where("categories", i) + ".skeleton", i);
                    cat.skeleton.emplace_back(e[0].get<int>(), e[1].get<int>());
                }
            }
            out.categories.push_back(std::move(cat));
        }
    }
    return out;
}

std::string write_annotations(const AnnotationFile& file) {
    json root;
    json images = json::array();
    for (const auto& im : file.images)
        images.push_back({{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}});
    json anns = json::array();
    for (const auto& a : file.annotations) {
        anns.push_back({{"id", a.id},
                        {"image_id", a.image_id},
                        {"category_id", 1},
                        {"keypoints", keypoint_triplets_json(a.keypoints)},
                        {"num_keypoints", a.num_labeled()},
                        {"bbox", bbox_json(a.bbox)},
                        {"area", a.area},
                        {"iscrowd", a.iscrowd ? 1 : 0}});
    }
    json cats = json::array();
    for (const auto& c : file.categories) {
        json skel = json::array();
        for (const auto& [a, b] : c.skeleton) skel.push_back({a, b});
        cats.push_back({{"id", c.id}, {"name", c.name}, {"supercategory", c.name}, {"keypoints", c.keypoints},
                        {"skeleton", skel}});
    }
    root["images"] = std::move(images);
    root["annotations"] = std::move(anns);
    root["categories"] = std::move(cats);
    return root.dump() + "\n";
}

std::map<long long, std::vector<Detection>> DetectionFile::grouped_by_image() const {
    std::map<long long, std::vector<Detection>> out;
    for (const auto& d : detections) out[d.image_id].push_back(d);
    return out;
}

DetectionFile parse_detections(std::string_view bytes) {
    const json root = parse_json(bytes);
    if (!root.is_array()) throw Error(ErrorCode::InvalidFieldType, "detection file root must be an array");
    DetectionFile out;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const json& d = root[i];
        Detection det;
        det.image_id = integer(d, "image_id", "detections", i);
        det.bbox = bbox_of(d, "detections", i);
        det.score = number(d, "score", "detections", i);
        det.category_id = d.is_object() && d.contains("category_id") ? integer(d, "category_id", "detections", i) : 1;
        if (!(det.score >= 0.0 && det.score <= 1.0))
            throw Error(ErrorCode::ScoreOutOfRange, where("detections", i) + ".score = " + std::to_string(det.score), i);
        if (!(det.bbox.w > 0.0 && det.bbox.h > 0.0))
            throw Error(ErrorCode::NonPositiveBBox, where("detections", i) + ".bbox", i);
        out.detections.push_back(det);
    }
    return out;
}

std::string write_detections(const DetectionFile& file) {
    json root = json::array();
    for (const auto& d : file.detections)
        root.push_back({{"image_id", d.image_id}, {"bbox", bbox_json(d.bbox)}, {"score", d.score},
                        {"category_id", d.category_id}});
    return root.dump() + "\n";
}

ResultFile parse_results(std::string_view bytes, const SkeletonSpec& spec) {
    const json root = parse_json(bytes);
    if (!root.is_array()) throw Error(ErrorCode::InvalidFieldType, "result file root must be an array");
    ResultFile out;
    for (std::size_t i = 0; i < root.size(); ++i) {
        const json& r = root[i];
        KeypointResult res;
        res.image_id = integer(r, "image_id", "results", i);
        res.category_id = r.is_object() && r.contains("category_id") ? integer(r, "category_id", "results", i) : 1;
        res.keypoints = numbers(array(r, "keypoints", "results", i), "results", i);
        if (res.keypoints.size() != static_cast<std::size_t>(3 * spec.K))
            throw Error(ErrorCode::TripletLengthMismatch,
                        where("results", i) + " has " + std::to_string(res.keypoints.size()) + " keypoint numbers", i);
        res.score = number(r, "score", "results", i);
        out.results.push_back(std::move(res));
    }
    return out;
}

std::string write_results(const ResultFile& results) {
    json root = json::array();
    for (const auto& r : results.results)
        root.push_back({{"image_id", r.image_id}, {"category_id", r.category_id}, {"keypoints", r.keypoints},
                        {"score", r.score}});
    return root.dump();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + path);
}

} // namespace poseforge
