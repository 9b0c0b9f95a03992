#include "doctest.h"
#include "helpers.hpp"

#include <cstdlib>

#include "poseforge/config.hpp"

using namespace poseforge;

TEST_CASE("bundled config matches the built-in defaults") {
    const GlobalConfig g = load_global_config(pft::data_path("configs/default.json"));
    const GlobalConfig d = default_global_config();
    CHECK(g.skeleton == d.skeleton);
    CHECK(g.net == d.net);
    CHECK(g.train == d.train);
    CHECK(g.aug == d.aug);
    CHECK(g.heatmap == d.heatmap);
    CHECK(g.oks == d.oks);
    CHECK(g.style == StyleParams::monet_like());
    CHECK(g.seed == 0);
    CHECK(g.heatmap.heatmap_size == Size{g.net.input_size.w / 4, g.net.input_size.h / 4});
}

TEST_CASE("module configs round trip") {
    NetConfig n;
    n.input_size = {64, 96};
    n.tap = FeatureTap::SecondToLast;
    n.pose_bottleneck_channels = 4;
    n.init_gain = 2.5;
    CHECK(net_config_from_json(net_config_to_json(n)) == n);

    TrainConfig t;
    t.lr = 1e-4;
    t.optimizer = OptimizerKind::Sgd;
    t.recon_enabled = false;
    t.seed = 123456789012345ULL;
    CHECK(train_config_from_json(train_config_to_json(t)) == t);

    const AugConfig a = micro_scale_aug_config();
    CHECK(aug_config_from_json(aug_config_to_json(a)) == a);

    const HeatmapConfig h = make_heatmap_config({32, 48}, 1.5, false);
    CHECK(heatmap_config_from_json(heatmap_config_to_json(h)) == h);

    OksParams o = OksParams::from_skeleton(coco17_skeleton());
    o.thresholds = {0.5, 0.75};
    CHECK(oks_params_from_json(oks_params_to_json(o), coco17_skeleton()) == o);

    // Missing keys keep their defaults.
    CHECK(net_config_from_json("{}") == NetConfig{});
    CHECK(train_config_from_json("{\"steps\": 5}").steps == 5);
}

TEST_CASE("config errors name the problem") {
    CHECK(pft::code_of([] { net_config_from_json("{\"bogus\": 1}"); }) == ErrorCode::InvalidConfig);
    CHECK(pft::code_of([] { train_config_from_json("{\"lr\": \"fast\"}"); }) == ErrorCode::InvalidConfig);
    CHECK(pft::code_of([] { train_config_from_json("{\"lr\": -1}"); }) == ErrorCode::InvalidConfig);
    CHECK(pft::code_of([] { net_config_from_json("{\"tap\": \"first\"}"); }) == ErrorCode::InvalidConfig);
    CHECK(pft::code_of([] { load_global_config("/nonexistent/poseforge.json"); }) == ErrorCode::IoFailure);
    try {
        net_config_from_json("{\"bogus\": 1}");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
}

TEST_CASE("seed environment override") {
    ::unsetenv("POSEFORGE_SEED");
    CHECK(apply_seed_env(7) == 7);
    ::setenv("POSEFORGE_SEED", "42", 1);
    CHECK(apply_seed_env(7) == 42);
    ::setenv("POSEFORGE_SEED", "-3", 1);
    CHECK(pft::code_of([] { apply_seed_env(7); }) == ErrorCode::InvalidConfig);
    ::setenv("POSEFORGE_SEED", "12ab", 1);
    CHECK(pft::code_of([] { apply_seed_env(7); }) == ErrorCode::InvalidConfig);
    ::unsetenv("POSEFORGE_SEED");
}
