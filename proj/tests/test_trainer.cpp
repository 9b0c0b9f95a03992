#include "doctest.h"
#include "helpers.hpp"

#include "poseforge/config.hpp"
#include "poseforge/synthdata.hpp"
#include "poseforge/trainer.hpp"
#include "poseforge/verify.hpp"

using namespace poseforge;

namespace {

NetConfig small_net() {
    NetConfig c;
    c.input_size = {48, 64};
    c.base_channels = 8;
    c.head_channels = 8;
    return c;
}

void fill(nn::Parameter* p, double v) { std::fill(p->value.data.begin(), p->value.data.end(), v); }

nn::Parameter* param(MicroUNet& net, const std::string& name) {
    auto ps = net.parameters_with_prefix(name);
    REQUIRE(ps.size() == 1);
    return ps.front();
}

std::vector<Scene> scenes(int n, std::uint64_t seed) {
    Rng rng(seed);
    FigureParams fp;
    fp.image_size = {96, 96};
    fp.figure_height = {60.0, 80.0};
    fp.limb_thickness = 3.0;
    std::vector<Scene> out;
    for (int i = 0; i < n; ++i) out.push_back(generate_scene(coco17_skeleton(), fp, 1, rng));
    return out;
}

struct Fixture {
    SkeletonSpec spec = coco17_skeleton();
    std::vector<Scene> data = scenes(4, 11);
    HeatmapConfig hm = make_heatmap_config({48, 64}, 2.0);
    TrainData train_data() const { return {&data, &spec, micro_scale_aug_config(), hm}; }
};

std::vector<double> flat_params(const MicroUNet& net) {
    std::vector<double> out;
    for (const auto& p : net.parameters()) out.insert(out.end(), p.value.data.begin(), p.value.data.end());
    return out;
}

} // namespace

TEST_CASE("multitask loss constant example") {
    MicroUNet net(small_net(), 1);
    const Image gray(48, 64, 0.5f); // centred to zero, so the latent is the encoder bias
    const double c = 0.3;
    fill(param(net, "pose_head.conv2.weight"), 0.0);
    fill(param(net, "pose_head.conv2.bias"), c);
    fill(param(net, "recon_head.conv.weight"), 0.0);
    auto* rb = param(net, "recon_head.conv.bias");
    const auto& eb = param(net, "encoder.patch.bias")->value;
    for (std::size_t i = 0; i < rb->value.size(); ++i) rb->value.data[i] = eb.data[i] - 1.0;

    const HeatmapConfig hm_cfg = make_heatmap_config({48, 64}, 2.0);
    Heatmap target(17, hm_cfg);
    std::fill(target.data.begin(), target.data.end(), c + 1.0);
    TrainConfig tc;
    auto ctx = multitask_loss(net, gray, target, std::vector<bool>(17, true), tc);
    CHECK(ctx->loss_rgb == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ctx->loss_pose == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ctx->loss_total == doctest::Approx(2.0).epsilon(1e-12));

    tc.w_rgb = 0.25;
    tc.w_pose = 3.0;
    CHECK(multitask_loss(net, gray, target, std::vector<bool>(17, true), tc)->loss_total ==
          doctest::Approx(3.25).epsilon(1e-12));

    // Masked-out channels do not contribute.
    std::vector<bool> mask(17, false);
    mask[3] = true;
    for (int v = 0; v < target.height(); ++v)
        for (int u = 0; u < target.width(); ++u) target.at(5, v, u) = 100.0;
    CHECK(multitask_loss(net, gray, target, mask, TrainConfig{})->loss_pose == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero loss gives zero gradient") {
    MicroUNet net(small_net(), 2);
    Rng rng(3);
    Image img(48, 64);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const nn::Tensor pose = net.predict(img, Task::Pose);
    Heatmap target(17, make_heatmap_config({48, 64}, 2.0));
    target.data = pose.data;

    TrainConfig tc;
    tc.recon_enabled = false;
    net.zero_grad();
    auto ctx = multitask_loss(net, img, target, std::vector<bool>(17, true), tc);
    CHECK(ctx->loss_total == 0.0);
    backward(*ctx);
    for (const auto& p : net.parameters())
        for (double g : p.grad.data) REQUIRE(g == 0.0);
}

TEST_CASE("recon disabled") {
    MicroUNet net(small_net(), 4);
    Image img(48, 64, 0.2f);
    Heatmap target(17, make_heatmap_config({48, 64}, 2.0));
    std::fill(target.data.begin(), target.data.end(), 0.5);
    TrainConfig tc;
    tc.recon_enabled = false;
    net.zero_grad();
    auto ctx = multitask_loss(net, img, target, std::vector<bool>(17, true), tc);
    CHECK(ctx->loss_rgb == 0.0);
    CHECK(ctx->loss_total == doctest::Approx(ctx->loss_pose).epsilon(1e-15));
    backward(*ctx);
    for (auto* p : net.parameters_with_prefix("recon_head."))
        for (double g : p->grad.data) REQUIRE(g == 0.0);
    double pose_grad = 0.0;
    for (auto* p : net.parameters_with_prefix("pose_head."))
        for (double g : p->grad.data) pose_grad = std::max(pose_grad, std::fabs(g));
    CHECK(pose_grad > 0.0);
}

TEST_CASE("recon toggle leaves the pose forward untouched") {
    Fixture f;
    const TrainSample s = [&] {
        Rng rng(5);
        return make_train_sample(f.data[0].image, f.data[0].people[0], f.spec, AugConfig{}, f.hm, rng, false);
    }();
    MicroUNet a(small_net(), 6), b(small_net(), 6);
    TrainConfig on, off;
    off.recon_enabled = false;
    const auto ca = multitask_loss(a, s.input, s.heatmap, s.mask, on);
    const auto cb = multitask_loss(b, s.input, s.heatmap, s.mask, off);
    CHECK(ca->loss_pose == cb->loss_pose);
    CHECK(ca->loss_rgb > 0.0);
}

TEST_CASE("optimizer examples") {
    std::vector<nn::Parameter> ps(2);
    ps[0].value = nn::Tensor({1, 1, 2}, 1.0);
    ps[0].grad = nn::Tensor({1, 1, 2}, 0.0);
    ps[0].grad.data = {0.5, -2.0};
    ps[1].value = nn::Tensor({1, 1, 1}, 3.0);
    ps[1].grad = nn::Tensor({1, 1, 1}, 7.0);
    ps[1].trainable = false;

    TrainConfig sgd;
    sgd.optimizer = OptimizerKind::Sgd;
    sgd.lr = 0.1;
    Optimizer(sgd).step(ps);
    CHECK(ps[0].value.data[0] == doctest::Approx(0.95));
    CHECK(ps[0].value.data[1] == doctest::Approx(1.2));
    CHECK(ps[1].value.data[0] == 3.0);

    // Adam's first step moves each coordinate by lr * g / (|g| + eps').
    ps[0].value.data = {1.0, 1.0};
    TrainConfig adam;
    adam.lr = 0.01;
    Optimizer opt(adam);
    opt.step(ps);
    CHECK(ps[0].value.data[0] == doctest::Approx(0.99).epsilon(1e-9));
    CHECK(ps[0].value.data[1] == doctest::Approx(1.01).epsilon(1e-9));
}

TEST_CASE("train with lr 0 changes nothing") {
    Fixture f;
    f.data.resize(1);
    MicroUNet net(small_net(), 7);
    const auto before = flat_params(net);
    TrainConfig tc;
    tc.lr = 0.0;
    tc.steps = 4;
    tc.batch_size = 1;
    tc.augment = false;
    const auto log = train(f.train_data(), net, tc);
    CHECK(flat_params(net) == before);
    REQUIRE(log.size() == 4);
    for (const auto& r : log) {
        CHECK(r.loss_total == log[0].loss_total);
        CHECK(r.loss_pose == log[0].loss_pose);
    }
}

TEST_CASE("train is deterministic and keeps the encoder frozen") {
    Fixture f;
    TrainConfig tc;
    tc.steps = 6;
    tc.batch_size = 2;
    MicroUNet a(small_net(), 8), b(small_net(), 8);
    const auto enc_before = param(a, "encoder.patch.weight")->value;
    std::vector<StepRecord> seen;
    const auto la = train(f.train_data(), a, tc, [&](const StepRecord& r) { seen.push_back(r); });
    const auto lb = train(f.train_data(), b, tc);
    CHECK(a.save_checkpoint(6) == b.save_checkpoint(6));
    REQUIRE(la.size() == lb.size());
    REQUIRE(seen.size() == la.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        CHECK(la[i].loss_total == lb[i].loss_total);
        CHECK(la[i].grad_norm == lb[i].grad_norm);
        CHECK(seen[i].loss_total == la[i].loss_total);
        CHECK(la[i].loss_total == doctest::Approx(tc.w_rgb * la[i].loss_rgb + tc.w_pose * la[i].loss_pose).epsilon(1e-12));
    }
    CHECK(param(a, "encoder.patch.weight")->value == enc_before);

    MicroUNet c(small_net(), 8);
    tc.seed = 1;
    train(f.train_data(), c, tc);
    CHECK(c.save_checkpoint(6) != a.save_checkpoint(6));
}

TEST_CASE("pose loss decreases on a tiny set") {
    Fixture f;
    MicroUNet net(small_net(), 9);
    TrainConfig tc;
    tc.steps = 80;
    tc.batch_size = 2;
    tc.augment = false;
    const auto log = train(f.train_data(), net, tc);
    double first = 0.0, last = 0.0;
    for (int i = 0; i < 10; ++i) {
        first += log[static_cast<std::size_t>(i)].loss_pose;
        last += log[log.size() - 1 - static_cast<std::size_t>(i)].loss_pose;
    }
    CHECK(last < 0.7 * first);
}

TEST_CASE("train input errors") {
    Fixture f;
    MicroUNet net(small_net(), 10);
    std::vector<Scene> empty;
    CHECK(pft::code_of([&] { train({&empty, &f.spec, AugConfig{}, f.hm}, net, TrainConfig{}); }) ==
          ErrorCode::EmptyDataset);
    std::vector<Scene> unlabeled(1);
    unlabeled[0].image = Image(96, 96);
    CHECK(pft::code_of([&] { train({&unlabeled, &f.spec, AugConfig{}, f.hm}, net, TrainConfig{}); }) ==
          ErrorCode::EmptyDataset);
    TrainConfig bad;
    bad.batch_size = 0;
    CHECK(pft::code_of([&] { train(f.train_data(), net, bad); }) == ErrorCode::InvalidConfig);
    bad = TrainConfig{};
    bad.lr = -1.0;
    CHECK(pft::code_of([&] { validate_train_config(bad); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("gradcheck on the tiny network") {
    const GradcheckReport ok = gradcheck_tiny(0);
    CHECK(ok.max_rel_error < 1e-4);
    CHECK_FALSE(ok.entries.empty());
    for (std::size_t i = 1; i < ok.entries.size(); ++i)
        CHECK(ok.entries[i - 1].max_rel_error >= ok.entries[i].max_rel_error);

    const GradcheckReport bad = gradcheck_tiny(0, true);
    CHECK(bad.max_rel_error > 1e-2);
    CHECK(bad.entries.front().name.rfind("pose_head.", 0) == 0);
}

TEST_CASE("generic gradcheck on a quadratic") {
    nn::Parameter p;
    p.name = "x";
    p.value = nn::Tensor({1, 1, 3}, 0.0);
    p.value.data = {0.5, -1.0, 2.0};
    p.grad = nn::Tensor({1, 1, 3}, 0.0);
    auto loss = [&] {
        double s = 0.0;
        for (double v : p.value.data) s += v * v * v;
        return s;
    };
    auto analytic = [&] {
        for (std::size_t i = 0; i < 3; ++i) p.grad.data[i] = 3.0 * p.value.data[i] * p.value.data[i];
    };
    for (int order : {2, 4}) {
        GradcheckOptions o;
        o.order = order;
        const auto r = gradcheck({&p}, loss, analytic, o);
        // For x^3 the central difference is off by exactly h^2, largest relative to 3x^2 at x = 0.5.
        if (order == 2)
            CHECK(r.max_rel_error == doctest::Approx(1e-6 / 0.75).epsilon(1e-4));
        else
            CHECK(r.max_rel_error < 1e-10);
        CHECK(r.entries.front().checked == 3);
    }
}
