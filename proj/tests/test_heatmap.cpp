#include "doctest.h"
#include "helpers.hpp"

#include "poseforge/geometry.hpp"
#include "poseforge/heatmap.hpp"
#include "poseforge/verify.hpp"

using namespace poseforge;

namespace {

SkeletonSpec single_point() {
    SkeletonSpec s;
    s.name = "one";
    s.K = 1;
    s.oks_k = {0.1};
    return s;
}

// Places keypoint 0 at the given heatmap coordinates.
PersonInstance at_grid(const HeatmapConfig& cfg, double u, double v, int K = 1) {
    PersonInstance p = pft::person(K);
    const auto [x, y] = udp_resize_transform(cfg.heatmap_size, cfg.input_size).apply(u, v);
    p.keypoints[0] = {x, y, 2};
    return p;
}

// Broken codec for the negative control: keypoints snap to the integer grid
// before rendering.
Heatmap rounding_encode(const PersonInstance& inst, const HeatmapConfig& cfg, const SkeletonSpec& spec) {
    PersonInstance snapped = inst;
    const Affine2D to_grid = udp_resize_transform(cfg.input_size, cfg.heatmap_size);
    const Affine2D back = udp_resize_transform(cfg.heatmap_size, cfg.input_size);
    for (auto& kp : snapped.keypoints) {
        const auto [u, v] = to_grid.apply(kp.x, kp.y);
        const auto [x, y] = back.apply(std::floor(u + 0.5), std::floor(v + 0.5));
        kp.x = x;
        kp.y = y;
    }
    return encode(snapped, cfg, spec);
}

} // namespace

TEST_CASE("encode examples") {
    const SkeletonSpec spec = single_point();
    const HeatmapConfig cfg = make_heatmap_config({192, 256}, 2.0);
    const Heatmap hm = encode(at_grid(cfg, 10, 12), cfg, spec);
    CHECK(hm.at(0, 12, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(hm.at(0, 12, 12) == doctest::Approx(std::exp(-0.5)).epsilon(1e-9));
    CHECK(hm.at(0, 14, 10) == doctest::Approx(0.606531).epsilon(1e-6));

    const Heatmap frac = encode(at_grid(cfg, 10.3, 12.7), cfg, spec);
    int bu = -1, bv = -1;
    double best = -1;
    for (int v = 0; v < frac.height(); ++v)
        for (int u = 0; u < frac.width(); ++u)
            if (frac.at(0, v, u) > best) {
                best = frac.at(0, v, u);
                bu = u;
                bv = v;
            }
    CHECK(bu == 10);
    CHECK(bv == 13);
}

TEST_CASE("encode supervision rules") {
    const SkeletonSpec spec = coco17_skeleton();
    PersonInstance p = pft::person(17, 40, 60);
    p.keypoints[2].v = 0;
    p.keypoints[4].v = 1;
    p.keypoints[6] = {-500.0, 20.0, 2};
    const HeatmapConfig on = make_heatmap_config({192, 256}, 2.0, true);
    const Heatmap a = encode(p, on, spec);
    CHECK(a.channel_is_zero(2));
    CHECK_FALSE(a.channel_is_zero(4));
    CHECK(a.channel_is_zero(6));
    CHECK(a.outside_grid == std::vector<int>{6});
    for (double v : a.data) REQUIRE((v >= 0.0 && v <= 1.0));

    const Heatmap b = encode(p, make_heatmap_config({192, 256}, 2.0, false), spec);
    CHECK(b.channel_is_zero(4));
    CHECK_FALSE(b.channel_is_zero(3));
}

TEST_CASE("peak value follows the closed form") {
    const SkeletonSpec spec = single_point();
    Rng rng(8);
    for (double sigma : {1.5, 2.0, 3.0}) {
        const HeatmapConfig cfg = make_heatmap_config({192, 256}, sigma);
        for (int i = 0; i < 200; ++i) {
            const double u = rng.uniform(2, 45), v = rng.uniform(2, 61);
            const Heatmap hm = encode(at_grid(cfg, u, v), cfg, spec);
            double peak = 0;
            for (double x : hm.data) peak = std::max(peak, x);
            const double du = u - std::round(u), dv = v - std::round(v);
            REQUIRE(peak == doctest::Approx(std::exp(-(du * du + dv * dv) / (2 * sigma * sigma))).epsilon(1e-9));
        }
    }
}

TEST_CASE("decode examples") {
    const HeatmapConfig cfg = make_heatmap_config({192, 256}, 2.0);
    Heatmap delta(1, cfg);
    delta.at(0, 12, 10) = 1.0;
    const auto d = decode_heatmap_coords(delta);
    CHECK(d[0].x == 10.0);
    CHECK(d[0].y == 12.0);
    CHECK(d[0].confidence == 1.0);

    const SkeletonSpec spec = single_point();
    const auto r = decode_heatmap_coords(encode(at_grid(cfg, 10.3, 12.7), cfg, spec));
    CHECK(std::hypot(r[0].x - 10.3, r[0].y - 12.7) < 0.05);

    Heatmap zero(2, cfg);
    zero.at(1, 3, 3) = 0.5;
    const auto z = decode(zero);
    CHECK(z[0].x == 0.0);
    CHECK(z[0].y == 0.0);
    CHECK(z[0].confidence == 0.0);

    // Border argmax skips refinement.
    Heatmap edge(1, cfg);
    edge.at(0, 0, 5) = 1.0;
    edge.at(0, 1, 5) = 0.9;
    const auto e = decode_heatmap_coords(edge);
    CHECK(e[0].x == 5.0);
    CHECK(e[0].y == 0.0);
}

TEST_CASE("decode maps back to input pixels") {
    const SkeletonSpec spec = single_point();
    const HeatmapConfig cfg = make_heatmap_config({96, 128}, 2.0);
    PersonInstance p = pft::person(1);
    p.keypoints[0] = {37.25, 81.6, 2};
    const auto d = decode(encode(p, cfg, spec));
    CHECK(std::hypot(d[0].x - 37.25, d[0].y - 81.6) < 0.2);
}

TEST_CASE("decode is invariant to positive channel scaling") {
    const SkeletonSpec spec = single_point();
    const HeatmapConfig cfg = make_heatmap_config({192, 256}, 2.0);
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        Heatmap hm = encode(at_grid(cfg, rng.uniform(3, 44), rng.uniform(3, 60)), cfg, spec);
        const auto a = decode_heatmap_coords(hm);
        const double c = rng.uniform(0.05, 20.0);
        for (auto& v : hm.data) v *= c;
        const auto b = decode_heatmap_coords(hm);
        REQUIRE(std::fabs(a[0].x - b[0].x) < 1e-9);
        REQUIRE(std::fabs(a[0].y - b[0].y) < 1e-9);
        REQUIRE(b[0].confidence == doctest::Approx(c * a[0].confidence).epsilon(1e-12));
    }
}

TEST_CASE("flip_heatmap examples") {
    const SkeletonSpec spec = coco17_skeleton();
    const HeatmapConfig cfg = make_heatmap_config({192, 256}, 2.0);
    Heatmap hm(17, cfg);
    hm.at(5, 20, 5) = 1.0;
    const Heatmap f = flip_heatmap(hm, spec);
    CHECK(f.at(6, 20, 42) == 1.0);
    CHECK(flip_heatmap(f, spec).data == hm.data);

    Rng rng(21);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        PersonInstance p = pft::person(17);
        for (auto& kp : p.keypoints) kp = {rng.uniform(0, 191), rng.uniform(0, 255), 1 + static_cast<int>(rng.below(2))};
        const Heatmap a = encode(flip_instance(p, 192, spec), cfg, spec);
        const Heatmap b = flip_heatmap(encode(p, cfg, spec), spec);
        for (std::size_t j = 0; j < a.data.size(); ++j) worst = std::max(worst, std::fabs(a.data[j] - b.data[j]));

        const auto da = decode_heatmap_coords(b);
        const auto db = decode_heatmap_coords(encode(p, cfg, spec));
        const auto perm = flip_index_map(spec);
        for (int k = 0; k < 17; ++k) {
            REQUIRE(std::fabs(da[perm[k]].x - (47.0 - db[k].x)) < 1e-9);
            REQUIRE(std::fabs(da[perm[k]].y - db[k].y) < 1e-9);
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("codec roundtrip bound") {
    const CodecReport r = codec_roundtrip(1000, 1, {1.5, 2.0, 3.0});
    CHECK(r.n == 3000);
    CHECK(r.max_error < 0.05);
}

TEST_CASE("flip consistency and the integer-rounding negative control") {
    const SkeletonSpec spec = coco17_skeleton();
    const CodecReport good = flip_consistency(1000, 2, spec);
    CHECK(good.max_error < 0.1);

    Codec broken;
    broken.encode = rounding_encode;
    const CodecReport bad = flip_consistency(1000, 2, spec, broken);
    CHECK(bad.max_error > 0.1);
}

TEST_CASE("heatmap blob round trip") {
    const HeatmapConfig cfg = make_heatmap_config({48, 64}, 2.0);
    const Heatmap hm = encode(pft::person(17, 10, 12), cfg, coco17_skeleton());
    const std::string blob = serialize_heatmap(hm);
    CHECK(blob.size() == 16 + hm.data.size() * 4);
    const Heatmap back = deserialize_heatmap(blob);
    CHECK(back.K == 17);
    CHECK(back.config.heatmap_size == cfg.heatmap_size);
    for (std::size_t i = 0; i < hm.data.size(); ++i)
        REQUIRE(back.data[i] == static_cast<double>(static_cast<float>(hm.data[i])));
    CHECK(pft::code_of([&] { deserialize_heatmap(blob.substr(0, 20)); }) == ErrorCode::IoFailure);
}

TEST_CASE("heatmap config validation") {
    CHECK(pft::code_of([] { make_heatmap_config({50, 64}); }) == ErrorCode::InvalidConfig);
    CHECK(pft::code_of([] { make_heatmap_config({48, 64}, 0.0); }) == ErrorCode::InvalidConfig);
}
