#include "doctest.h"
#include "generators.hpp"
#include "helpers.hpp"

#include <string>

#include "poseforge/coco_io.hpp"

using namespace poseforge;
using pft::random_file;
using pft::random_real;

namespace {

std::string numbers_json(int n) {
    std::string s = "[";
    for (int i = 0; i < n; ++i) s += (i ? "," : "") + std::to_string(i % 3 == 2 ? 2 : 10 + i);
    return s + "]";
}

std::string keypoints_json(int K) {
    std::string s = "[";
    for (int k = 0; k < K; ++k) {
        if (k) s += ",";
        s += std::to_string(10 + k) + "," + std::to_string(20 + k) + ",2";
    }
    return s + "]";
}

std::string doc(const std::string& kps, long long image_ref = 7) {
    return R"({"images":[{"id":7,"file_name":"a.jpg","width":64,"height":48}],"annotations":[{"id":1,"image_id":)" +
           std::to_string(image_ref) + R"(,"keypoints":)" + kps +
           R"(,"bbox":[1,2,30,40],"area":900,"iscrowd":0,"category_id":1}],"categories":[]})";
}

} // namespace

TEST_CASE("parse_annotations examples") {
    const SkeletonSpec spec = coco17_skeleton();
    const AnnotationFile f = parse_annotations(doc(keypoints_json(17)), spec);
    REQUIRE(f.annotations.size() == 1);
    CHECK(f.annotations[0].keypoints[3].x == 13.0);
    CHECK(f.annotations[0].keypoints[3].y == 23.0);
    CHECK(f.annotations[0].keypoints[3].v == 2);
    CHECK(f.annotations[0].area == 900.0);

    try {
        parse_annotations(doc(numbers_json(50)), spec);
        FAIL("expected TripletLengthMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TripletLengthMismatch);
        CHECK(e.where() == std::optional<std::size_t>(0));
    }
    CHECK(pft::code_of([&] { parse_annotations(doc(keypoints_json(17), 8), spec); }) == ErrorCode::DanglingImageId);
    CHECK(pft::code_of([&] { parse_annotations(R"({"images":[]})", spec); }) == ErrorCode::MissingField);
    try {
        parse_annotations(R"({"images": [ })", spec);
        FAIL("expected MalformedJson");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MalformedJson);
        CHECK(e.where().has_value());
    }
}

TEST_CASE("write_results examples") {
    const SkeletonSpec spec = coco17_skeleton();
    CHECK(write_results({}) == "[]");

    KeypointResult r;
    r.image_id = 3;
    r.score = 0.5;
    r.keypoints.assign(51, 0.0);
    r.keypoints[0] = 12.25;
    const ResultFile back = parse_results(write_results({{r}}), spec);
    REQUIRE(back.results.size() == 1);
    CHECK(back.results[0].keypoints[0] == 12.25);

    Rng rng(5);
    ResultFile many;
    for (int i = 0; i < 100; ++i) {
        KeypointResult x;
        x.image_id = static_cast<long long>(rng.below(1000));
        x.score = rng.uniform();
        for (int k = 0; k < 51; ++k) x.keypoints.push_back(random_real(rng));
        many.results.push_back(x);
    }
    CHECK(parse_results(write_results(many), spec) == many);
}

TEST_CASE("parse_detections examples") {
    const DetectionFile one = parse_detections(R"([{"image_id":1,"bbox":[0,0,10,20],"score":0.9,"category_id":1}])");
    REQUIRE(one.detections.size() == 1);
    CHECK(one.detections[0].score == 0.9);

    CHECK(pft::code_of([] { parse_detections(R"([{"image_id":1,"bbox":[0,0,10,20],"score":1.5}])"); }) ==
          ErrorCode::ScoreOutOfRange);

    const DetectionFile three = parse_detections(
        R"([{"image_id":4,"bbox":[0,0,1,1],"score":0.1},{"image_id":9,"bbox":[0,0,1,1],"score":0.2},{"image_id":4,"bbox":[0,0,1,1],"score":0.3}])");
    const auto groups = three.grouped_by_image();
    REQUIRE(groups.size() == 2);
    CHECK(groups.at(4).size() == 2);
    CHECK(groups.at(9).size() == 1);
    CHECK(groups.at(4)[1].score == 0.3);
    CHECK(parse_detections(write_detections(three)) == three);
}

TEST_CASE("triplet conversions") {
    std::vector<Keypoint> kps{{1.5, 2.5, 0}, {3.0, 4.0, 1}, {5.0, 6.0, 2}};
    CHECK(from_triplets(to_triplets(kps), 3) == kps);
    CHECK(pft::code_of([] { from_triplets({1, 2, 3, 4}, 1); }) == ErrorCode::TripletLengthMismatch);
    CHECK(pft::code_of([] { from_triplets({1, 2, 7}, 1); }) == ErrorCode::InvalidVisibility);
}

TEST_CASE("annotation write then parse is the identity on 1000 random files") {
    const SkeletonSpec spec = coco17_skeleton();
    Rng rng(20170901);
    for (int i = 0; i < 1000; ++i) {
        const AnnotationFile f = random_file(rng, spec);
        REQUIRE(parse_annotations(write_annotations(f), spec) == f);
    }
}

TEST_CASE("bundled COCO excerpt parses") {
    const SkeletonSpec spec = coco17_skeleton();
    const AnnotationFile f = parse_annotations(read_file(pft::data_path("coco_val2017_excerpt.json")), spec);
    CHECK(f.images.size() == 10);
    CHECK(f.annotations.size() >= 10);
    REQUIRE(f.categories.size() == 1);
    CHECK(f.categories[0].keypoints == spec.keypoint_names);
    CHECK(parse_annotations(write_annotations(f), spec) == f);
}

TEST_CASE("parser is total on mutated and random input") {
    const SkeletonSpec spec = coco17_skeleton();
    const std::string base = doc(keypoints_json(17));
    Rng rng(99);
    int typed = 0;
    for (int i = 0; i < 3000; ++i) {
        std::string s = base;
        if (i % 3 == 0) {
            s.assign(rng.below(64), ' ');
            for (auto& c : s) c = static_cast<char>(rng.below(256));
        } else {
            const int edits = 1 + static_cast<int>(rng.below(4));
            for (int e = 0; e < edits && !s.empty(); ++e) {
                const std::size_t at = rng.below(s.size());
                switch (rng.below(3)) {
                case 0: s[at] = "{}[],:\"0-9.eaz "[rng.below(15)]; break;
                case 1: s.erase(at, 1 + rng.below(8)); break;
                default: s.insert(at, 1, static_cast<char>(rng.below(128))); break;
                }
            }
        }
        try {
            parse_annotations(s, spec);
            parse_results(s, spec);
            parse_detections(s);
        } catch (const Error&) {
            ++typed;
        } catch (const std::exception& e) {
            FAIL("untyped exception: " << e.what() << " on input " << s);
        }
    }
    CHECK(typed > 0);
}
