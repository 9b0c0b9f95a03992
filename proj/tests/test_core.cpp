#include "doctest.h"
#include "helpers.hpp"

#include <algorithm>
#include <numeric>

#include "poseforge/core.hpp"

using namespace poseforge;

TEST_CASE("validate_instance examples") {
    const SkeletonSpec spec = coco17_skeleton();
    PersonInstance p = pft::person(17);
    p.keypoints[3].v = 0;
    CHECK_NOTHROW(validate_instance(p, spec));

    PersonInstance short_one = pft::person(16);
    CHECK(pft::code_of([&] { validate_instance(short_one, spec); }) == ErrorCode::KeypointCountMismatch);

    PersonInstance flat = pft::person(17);
    flat.area = 0.0;
    CHECK(pft::code_of([&] { validate_instance(flat, spec); }) == ErrorCode::NonPositiveArea);

    PersonInstance bad_v = pft::person(17);
    bad_v.keypoints[5].v = 3;
    CHECK(pft::code_of([&] { validate_instance(bad_v, spec); }) == ErrorCode::InvalidVisibility);
}

TEST_CASE("validate_instance accepts exactly the valid small cases") {
    SkeletonSpec spec;
    spec.name = "two";
    spec.K = 2;
    spec.oks_k = {0.1, 0.1};
    for (int n = 1; n <= 3; ++n)
        for (double area : {-1.0, 0.0, 2.0})
            for (int v0 = -1; v0 <= 3; ++v0)
                for (int v1 = -1; v1 <= 3; ++v1) {
                    PersonInstance p = pft::person(n);
                    p.area = area;
                    p.keypoints[0].v = v0;
                    if (n > 1) p.keypoints[1].v = v1;
                    const bool valid = n == 2 && area > 0 && v0 >= 0 && v0 <= 2 && v1 >= 0 && v1 <= 2;
                    bool ok = true;
                    try {
                        validate_instance(p, spec);
                    } catch (const Error&) {
                        ok = false;
                    }
                    CHECK(ok == valid);
                }
}

TEST_CASE("flip_index_map examples") {
    SkeletonSpec s;
    s.K = 3;
    s.flip_pairs = {{1, 2}};
    CHECK(flip_index_map(s) == std::vector<int>{0, 2, 1});

    SkeletonSpec e;
    e.K = 5;
    CHECK(flip_index_map(e) == std::vector<int>{0, 1, 2, 3, 4});

    const auto perm = flip_index_map(coco17_skeleton());
    int fixed = 0;
    for (int i = 0; i < 17; ++i) {
        CHECK(perm[perm[i]] == i);
        if (perm[i] == i) {
            ++fixed;
            CHECK(i == 0);
        }
    }
    CHECK(fixed == 1);

    SkeletonSpec dup;
    dup.K = 4;
    dup.flip_pairs = {{0, 1}, {1, 2}};
    CHECK(pft::code_of([&] { flip_index_map(dup); }) == ErrorCode::DuplicateIndexInFlipPairs);
}

TEST_CASE("flip_index_map is an involution over random pair sets") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        SkeletonSpec s;
        s.K = 2 + static_cast<int>(rng.below(30));
        std::vector<int> idx(static_cast<std::size_t>(s.K));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = s.K - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(static_cast<std::uint64_t>(i) + 1)]);
        const int pairs = static_cast<int>(rng.below(static_cast<std::uint64_t>(s.K / 2) + 1));
        for (int p = 0; p < pairs; ++p) s.flip_pairs.emplace_back(idx[2 * p], idx[2 * p + 1]);
        const auto perm = flip_index_map(s);
        for (int i = 0; i < s.K; ++i) REQUIRE(perm[perm[i]] == i);
    }
}

TEST_CASE("COCO-17 OKS constants are twice the COCO sigmas") {
    const double sigmas[17] = {.026, .025, .025, .035, .035, .079, .079, .072, .072,
                               .062, .062, .107, .107, .087, .087, .089, .089};
    const SkeletonSpec s = coco17_skeleton();
    for (int i = 0; i < 17; ++i) CHECK(s.oks_k[i] == doctest::Approx(2.0 * sigmas[i]).epsilon(1e-12));
}

TEST_CASE("skeleton JSON round trip and bundled file") {
    const SkeletonSpec s = coco17_skeleton();
    CHECK(skeleton_from_json(skeleton_to_json(s)) == s);
    CHECK(load_skeleton(pft::data_path("skeleton_coco17.json")) == s);
    CHECK(pft::code_of([] { skeleton_from_json(R"({"name":"x","K":2,"oks_k":[0.1,-1]})"); }) ==
          ErrorCode::InvalidSkeleton);
    CHECK(pft::code_of([] { skeleton_from_json(R"({"name":"x","K":2})"); }) == ErrorCode::MissingField);
    CHECK(pft::code_of([] { skeleton_from_json("{oops"); }) == ErrorCode::MalformedJson);
}
