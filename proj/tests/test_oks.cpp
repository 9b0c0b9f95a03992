#include "doctest.h"
#include "helpers.hpp"

#include "poseforge/coco_io.hpp"
#include "poseforge/oks.hpp"
#include "poseforge/oks_reference.hpp"

using namespace poseforge;

namespace {

OksParams params_k(std::vector<double> k) {
    OksParams p;
    p.k = std::move(k);
    return p;
}

PersonInstance two_point(double x0, double y0, double x1, double y1, double area = 400.0) {
    PersonInstance p;
    p.keypoints = {{x0, y0, 2}, {x1, y1, 2}};
    p.area = area;
    p.bbox = {0, 0, 20, 20};
    return p;
}

AnnotationFile one_image(const std::vector<PersonInstance>& gts) {
    AnnotationFile f;
    f.images.push_back({1, "a", 100, 100});
    for (auto g : gts) {
        g.image_id = 1;
        f.annotations.push_back(g);
    }
    return f;
}

// Independent KS sum, written out for the invariance properties.
double oks_direct(const PersonInstance& g, const PersonInstance& p, const std::vector<double>& k) {
    double s = 0;
    int n = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (g.keypoints[i].v == 0) continue;
        const double d2 = std::pow(g.keypoints[i].x - p.keypoints[i].x, 2) + std::pow(g.keypoints[i].y - p.keypoints[i].y, 2);
        s += std::exp(-d2 / (2 * g.area * k[i] * k[i]));
        ++n;
    }
    return s / n;
}

} // namespace

TEST_CASE("oks examples") {
    const OksParams p = params_k({0.1, 0.2});
    const PersonInstance g = two_point(5, 5, 10, 10);
    CHECK(oks(g, g, p) == 1.0);

    PersonInstance one = g;
    one.keypoints[1].v = 0;
    const double s = std::sqrt(g.area);
    PersonInstance moved = g;
    moved.keypoints[0].x += s * 0.1 * std::sqrt(2.0);
    CHECK(oks(one, moved, p) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    PersonInstance second = g;
    second.keypoints[1].y += s * 0.2 * std::sqrt(2.0);
    CHECK(oks(g, second, p) == doctest::Approx((1 + std::exp(-1.0)) / 2).epsilon(1e-12));
    CHECK(oks(g, second, p) == doctest::Approx(0.683940).epsilon(1e-6));

    PersonInstance blind = g;
    blind.keypoints[0].v = 0;
    blind.keypoints[1].v = 0;
    CHECK(pft::code_of([&] { oks(blind, g, p); }) == ErrorCode::NoVisibleKeypoints);
}

TEST_CASE("oks invariances") {
    const SkeletonSpec spec = coco17_skeleton();
    const OksParams p = OksParams::from_skeleton(spec);
    Rng rng(31);
    for (int i = 0; i < 300; ++i) {
        PersonInstance g = pft::person(17), q = pft::person(17);
        for (int k = 0; k < 17; ++k) {
            g.keypoints[k] = {rng.uniform(0, 100), rng.uniform(0, 100), static_cast<int>(rng.below(3))};
            q.keypoints[k] = {g.keypoints[k].x + rng.normal() * 4, g.keypoints[k].y + rng.normal() * 4, 2};
        }
        g.keypoints[0].v = 2;
        g.area = rng.uniform(100, 5000);
        const double base = oks(g, q, p);
        REQUIRE(base == doctest::Approx(oks_direct(g, q, p.k)).epsilon(1e-12));

        PersonInstance q2 = q;
        q2.score = rng.uniform();
        for (int k = 0; k < 17; ++k)
            if (g.keypoints[k].v == 0) q2.keypoints[k] = {rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), 0};
        REQUIRE(oks(g, q2, p) == base);

        const double tx = rng.uniform(-50, 50), ty = rng.uniform(-50, 50);
        PersonInstance gt = g, qt = q;
        for (int k = 0; k < 17; ++k) {
            gt.keypoints[k].x += tx;
            gt.keypoints[k].y += ty;
            qt.keypoints[k].x += tx;
            qt.keypoints[k].y += ty;
        }
        REQUIRE(oks(gt, qt, p) == doctest::Approx(base).epsilon(1e-9));

        const double c = rng.uniform(0.2, 5.0);
        PersonInstance gs = g, qs = q;
        gs.area *= c * c;
        for (int k = 0; k < 17; ++k) {
            gs.keypoints[k].x *= c;
            gs.keypoints[k].y *= c;
            qs.keypoints[k].x *= c;
            qs.keypoints[k].y *= c;
        }
        REQUIRE(oks(gs, qs, p) == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("match_image examples") {
    const OksParams p = params_k({0.1, 0.1});
    const PersonInstance g = two_point(10, 10, 20, 20);
    const auto m = match_image({g}, {g}, 0.5, p);
    REQUIRE(m.size() == 1);
    CHECK(m[0].gt == 0);
    CHECK(match_image({g, g}, {}, 0.5, p).empty());

    // Construct OKS values 0.8/0.7 to gt A and 0.6 from pred 2 to gt B by
    // displacing one of two keypoints: OKS = (1 + exp(-d^2/(2 s^2 k^2))) / 2.
    auto shift_for = [&](double target) { return std::sqrt(-2.0 * 400.0 * 0.01 * std::log(2.0 * target - 1.0)); };
    const PersonInstance A = two_point(10, 10, 20, 20);
    PersonInstance p1 = A, p2 = A;
    p1.score = 0.9;
    p2.score = 0.8;
    p1.keypoints[1].x += shift_for(0.8);
    p2.keypoints[1].x += shift_for(0.7);
    CHECK(oks(A, p1, p) == doctest::Approx(0.8));
    CHECK(oks(A, p2, p) == doctest::Approx(0.7));
    // Move B so that pred 2 sees it at OKS 0.6 while staying below 0.7.
    PersonInstance Bn = p2;
    Bn.keypoints[0].x += shift_for(0.6);
    CHECK(oks(Bn, p2, p) == doctest::Approx(0.6));
    CHECK(oks(Bn, p1, p) < 0.6);
    const auto mm = match_image({A, Bn}, {p1, p2}, 0.5, p);
    REQUIRE(mm.size() == 2);
    CHECK(mm[0].pred == 0);
    CHECK(mm[0].gt == 0);
    CHECK(mm[1].pred == 1);
    CHECK(mm[1].gt == 1);
}

TEST_CASE("evaluate examples") {
    const SkeletonSpec spec = coco17_skeleton();
    const OksParams p = OksParams::from_skeleton(spec);

    AnnotationFile f;
    f.images = {{1, "a", 100, 100}, {2, "b", 100, 100}};
    std::vector<PersonInstance> preds;
    for (int i = 0; i < 3; ++i) {
        PersonInstance g = pft::person(17, 10.0 + 20 * i, 10.0);
        g.image_id = 1 + i % 2;
        f.annotations.push_back(g);
        g.score = 0.5 + 0.1 * i;
        preds.push_back(g);
    }
    const EvalReport perfect = evaluate(f, preds, p);
    CHECK(perfect.ap == 1.0);
    CHECK(perfect.ar == 1.0);

    const OracleCase ladder = ladder_case(spec);
    const EvalReport r = evaluate(ladder.gt, ladder.preds, p);
    CHECK(r.ap == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.ar == doctest::Approx(0.5).epsilon(1e-15));
    for (double t : {0.5, 0.55, 0.6, 0.65, 0.7}) CHECK(r.ap_at(t) == 1.0);
    for (double t : {0.75, 0.8, 0.85, 0.9, 0.95}) CHECK(r.ap_at(t) == 0.0);

    // The ladder case really sits at OKS 0.72, computed without the library.
    CHECK(oks_direct(ladder.gt.annotations[0], ladder.preds[0], p.k) == doctest::Approx(0.72).epsilon(1e-9));

    std::vector<PersonInstance> stray = preds;
    stray[0].image_id = 77;
    CHECK(pft::code_of([&] { evaluate(f, stray, p); }) == ErrorCode::ImageIdMismatch);
    AnnotationFile empty;
    empty.images = f.images;
    CHECK(pft::code_of([&] { evaluate(empty, preds, p); }) == ErrorCode::EmptyGroundTruth);
}

TEST_CASE("evaluate through a result file matches the instance overload") {
    const SkeletonSpec spec = coco17_skeleton();
    const OksParams p = OksParams::from_skeleton(spec);
    Rng rng(77);
    for (int i = 0; i < 20; ++i) {
        const OracleCase c = random_oracle_case(rng, spec);
        ResultFile rf;
        for (const auto& q : c.preds) rf.results.push_back(instance_to_result(q));
        const EvalReport a = evaluate(c.gt, rf, p);
        const EvalReport b = evaluate(c.gt, c.preds, p);
        REQUIRE(a.ap == b.ap);
        REQUIRE(a.ar == b.ar);
    }
}

TEST_CASE("evaluate equals the brute-force oracle") {
    const SkeletonSpec spec = coco17_skeleton();
    const OksParams p = OksParams::from_skeleton(spec);
    Rng rng(2024);
    for (int i = 0; i < 200; ++i) {
        const OracleCase c = random_oracle_case(rng, spec);
        const EvalReport a = evaluate(c.gt, c.preds, p);
        const EvalReport b = evaluate_bruteforce(c.gt, c.preds, p);
        REQUIRE(a.ap_per_threshold == b.ap_per_threshold);
        REQUIRE(a.ar_per_threshold == b.ar_per_threshold);
        REQUIRE(a.ap == b.ap);
        REQUIRE(a.ar == b.ar);
    }
    CHECK(oks_selftest(50, 0, spec).ok());
}

TEST_CASE("adding thresholds above the best OKS never raises AP or AR") {
    const SkeletonSpec spec = coco17_skeleton();
    Rng rng(5150);
    for (int i = 0; i < 50; ++i) {
        const OracleCase c = random_oracle_case(rng, spec);
        OksParams p = OksParams::from_skeleton(spec);
        p.thresholds = {0.5, 0.6};
        const EvalReport base = evaluate(c.gt, c.preds, p);
        double best = 0.0;
        for (const auto& g : c.gt.annotations)
            for (const auto& q : c.preds)
                if (g.image_id == q.image_id && g.num_labeled() > 0) best = std::max(best, oks(g, q, p));
        if (best >= 0.99) continue;
        p.thresholds.push_back(std::max(0.61, best + 1e-6));
        const EvalReport more = evaluate(c.gt, c.preds, p);
        REQUIRE(more.ap <= base.ap + 1e-15);
        REQUIRE(more.ar <= base.ar + 1e-15);
    }
}

TEST_CASE("report formatting") {
    const SkeletonSpec spec = coco17_skeleton();
    const OracleCase c = ladder_case(spec);
    const EvalReport r = evaluate(c.gt, c.preds, OksParams::from_skeleton(spec));
    const std::string table = report_to_table({{"ladder", r}});
    CHECK(table.find("AP") != std::string::npos);
    CHECK(table.find("ladder") != std::string::npos);
    CHECK(report_to_svg(r).rfind("<svg", 0) == 0);
    CHECK(report_to_json(r).find("\"ap\"") != std::string::npos);
}

TEST_CASE("oks params validation") {
    OksParams p = OksParams::from_skeleton(coco17_skeleton());
    p.thresholds = {0.5, 0.5};
    CHECK(pft::code_of([&] { validate_oks_params(p); }) == ErrorCode::InvalidConfig);
    p.thresholds = {0.0};
    CHECK(pft::code_of([&] { validate_oks_params(p); }) == ErrorCode::InvalidConfig);
}
