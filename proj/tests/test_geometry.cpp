#include "doctest.h"
#include "helpers.hpp"

#include "poseforge/geometry.hpp"

using namespace poseforge;

namespace {

Image noise_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    Image img(w, h);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

std::uint64_t seed_with_first_draw(bool below_half) {
    for (std::uint64_t s = 0;; ++s) {
        Rng r(s);
        if ((r.uniform() < 0.5) == below_half) return s;
    }
}

} // namespace

TEST_CASE("udp_resize_transform examples") {
    const Affine2D t = udp_resize_transform({192, 256}, {48, 64});
    CHECK(t.apply(191, 255).first == doctest::Approx(47.0).epsilon(1e-15));
    CHECK(t.apply(191, 255).second == doctest::Approx(63.0).epsilon(1e-15));
    CHECK(t.apply(95.5, 0).first == doctest::Approx(23.5).epsilon(1e-15));
    CHECK(t.apply(0, 0) == Point{0.0, 0.0});
    CHECK(udp_resize_transform({40, 30}, {40, 30}) == Affine2D::identity());
    CHECK(pft::code_of([] { udp_resize_transform({1, 30}, {40, 30}); }) == ErrorCode::DegenerateSize);
}

TEST_CASE("crop_affine examples") {
    CropSpec c;
    c.output_size = {48, 64};
    c.scale = {47.0, 63.0};
    c.center = {100.0, 50.0};
    const Affine2D t = crop_affine(c);
    CHECK(t.m[0] == 1.0);
    CHECK(t.m[1] == 0.0);
    CHECK(t.m[3] == 0.0);
    CHECK(t.m[4] == 1.0);
    CHECK(t.m[2] == doctest::Approx(23.5 - 100.0));
    CHECK(t.m[5] == doctest::Approx(31.5 - 50.0));

    c.rotation = 180.0;
    c.scale = {30.0, 70.0};
    const auto [x, y] = crop_affine(c).apply(100.0, 50.0);
    CHECK(x == doctest::Approx(23.5).epsilon(1e-12));
    CHECK(y == doctest::Approx(31.5).epsilon(1e-12));

    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        CropSpec r;
        r.center = {rng.uniform(-50, 300), rng.uniform(-50, 300)};
        r.scale = {rng.uniform(10, 400), rng.uniform(10, 400)};
        r.rotation = rng.uniform(-180, 180);
        r.output_size = {2 + static_cast<int>(rng.below(200)), 2 + static_cast<int>(rng.below(200))};
        const Affine2D f = crop_affine(r), g = crop_affine_inverse(r);
        for (int i = 0; i < 100; ++i) {
            const double px = rng.uniform(0, r.output_size.w - 1), py = rng.uniform(0, r.output_size.h - 1);
            const auto [sx, sy] = g.apply(px, py);
            const auto [bx, by] = f.apply(sx, sy);
            REQUIRE(std::hypot(bx - px, by - py) < 1e-9);
        }
    }
    CropSpec bad;
    bad.scale = {0.0, 1.0};
    bad.output_size = {8, 8};
    CHECK(pft::code_of([&] { crop_affine(bad); }) == ErrorCode::DegenerateSize);
}

TEST_CASE("apply_affine_points examples") {
    const std::vector<Point> pts{{0, 0}, {1.5, -2.25}, {100, 7}};
    CHECK(apply_affine_points(Affine2D::identity(), pts) == pts);
    CHECK(apply_affine_points(Affine2D::translation(3, -2), {{0, 0}})[0] == Point{3.0, -2.0});
    const Affine2D t{{1.3, -0.4, 5.0, 0.7, 2.1, -3.0}};
    const auto back = apply_affine_points(t.inverse(), apply_affine_points(t, pts));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(std::fabs(back[i].first - pts[i].first) < 1e-9);
        CHECK(std::fabs(back[i].second - pts[i].second) < 1e-9);
    }
}

TEST_CASE("warp_image examples") {
    const Image img = noise_image(13, 9, 1);
    CHECK(warp_image(img, Affine2D::identity(), img.size()) == img);

    const Image flat(20, 16, 0.375f);
    const Affine2D t{{0.9, 0.2, 1.0, -0.15, 1.1, 2.0}};
    const Image w = warp_image(flat, t, {20, 16});
    const Affine2D inv = t.inverse();
    int interior = 0;
    for (int v = 0; v < 16; ++v)
        for (int u = 0; u < 20; ++u) {
            const auto [sx, sy] = inv.apply(u, v);
            if (sx >= 0 && sy >= 0 && sx <= 19 && sy <= 15) {
                ++interior;
                CHECK(w.at(u, v, 1) == doctest::Approx(0.375f).epsilon(1e-6));
            }
        }
    CHECK(interior > 100);

    const Image shifted = warp_image(img, Affine2D::translation(1, 0), img.size());
    for (int y = 0; y < img.height; ++y) {
        for (int c = 0; c < 3; ++c) CHECK(shifted.at(0, y, c) == 0.0f);
        for (int x = 1; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) CHECK(shifted.at(x, y, c) == img.at(x - 1, y, c));
    }
}

TEST_CASE("flip_instance examples") {
    const SkeletonSpec spec = coco17_skeleton();
    PersonInstance p = pft::person(17);
    p.keypoints[0].x = (192 - 1) / 2.0;
    p.keypoints[5].x = 10.0;
    const PersonInstance f = flip_instance(p, 192, spec);
    CHECK(f.keypoints[0].x == p.keypoints[0].x);
    CHECK(f.keypoints[6].x == 181.0);
    CHECK(f.keypoints[6].y == p.keypoints[5].y);
    CHECK(f.bbox.x == doctest::Approx(191.0 - p.bbox.x - p.bbox.w));

    const PersonInstance back = flip_instance(f, 192, spec);
    for (int k = 0; k < 17; ++k) {
        CHECK(back.keypoints[k].x == doctest::Approx(p.keypoints[k].x).epsilon(1e-14));
        CHECK(back.keypoints[k].y == p.keypoints[k].y);
        CHECK(back.keypoints[k].v == p.keypoints[k].v);
    }
    CHECK(back.bbox.x == doctest::Approx(p.bbox.x).epsilon(1e-14));

    const Image img = noise_image(7, 5, 2);
    CHECK(flip_image(flip_image(img)) == img);
}

TEST_CASE("half_body_crop examples") {
    const SkeletonSpec spec = coco17_skeleton();
    AugConfig cfg;
    const Size out{48, 64};

    PersonInstance none = pft::person(17, 20, 30, 0);
    Rng r0(1);
    CHECK(half_body_crop(none, spec, cfg, out, r0) == bbox_to_crop(none.bbox, out));

    PersonInstance p = pft::person(17);
    Rng rng(seed_with_first_draw(true));
    const CropSpec c = half_body_crop(p, spec, cfg, out, rng);
    double sx = 0, sy = 0;
    for (int i = 0; i <= 10; ++i) {
        sx += p.keypoints[i].x;
        sy += p.keypoints[i].y;
    }
    CHECK(c.center.first == doctest::Approx(sx / 11.0).epsilon(1e-12));
    CHECK(c.center.second == doctest::Approx(sy / 11.0).epsilon(1e-12));

    Rng lower_rng(seed_with_first_draw(false));
    const CropSpec lo = half_body_crop(p, spec, cfg, out, lower_rng);
    double lx = 0;
    for (int i = 11; i <= 16; ++i) lx += p.keypoints[i].x;
    CHECK(lo.center.first == doctest::Approx(lx / 6.0).epsilon(1e-12));

    Rng a(42), b(42);
    CHECK(half_body_crop(p, spec, cfg, out, a) == half_body_crop(p, spec, cfg, out, b));

    // Only one visible upper keypoint: fall back to the full-body crop.
    PersonInstance sparse = pft::person(17);
    for (int i = 1; i <= 10; ++i) sparse.keypoints[i].v = 0;
    Rng up(seed_with_first_draw(true));
    CHECK(half_body_crop(sparse, spec, cfg, out, up) == bbox_to_crop(sparse.bbox, out));
}

TEST_CASE("augment_appearance examples") {
    const Image img = noise_image(40, 30, 4);
    AugConfig off;
    off.blur_prob = 0.0;
    off.median_blur_prob = 0.0;
    off.dropout_prob = 0.0;
    Rng r(1);
    CHECK(augment_appearance(img, off, r) == img);

    AugConfig drop = off;
    drop.dropout_prob = 1.0;
    drop.dropout_hole_frac = {0.2, 0.4};
    const Image bright(50, 40, 1.0f);
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(s);
        const Image out = augment_appearance(bright, drop, rng);
        int zeros = 0;
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) zeros += out.at(x, y, 0) == 0.0f ? 1 : 0;
        const double frac = static_cast<double>(zeros) / (50.0 * 40.0);
        REQUIRE(frac >= 0.04 - 1e-12);
        REQUIRE(frac <= 0.16 + 1e-12);
    }

    const AugConfig full;
    Rng a(9), b(9);
    CHECK(augment_appearance(img, full, a) == augment_appearance(img, full, b));
}

TEST_CASE("validate_aug_config") {
    CHECK_NOTHROW(validate_aug_config(AugConfig{}));
    AugConfig bad;
    bad.flip_prob = 1.5;
    CHECK(pft::code_of([&] { validate_aug_config(bad); }) == ErrorCode::InvalidConfig);
    AugConfig hole;
    hole.dropout_hole_frac = {0.5, 0.3};
    CHECK(pft::code_of([&] { validate_aug_config(hole); }) == ErrorCode::InvalidConfig);
}
