#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "poseforge/core.hpp"
#include "poseforge/geometry.hpp"
#include "poseforge/heatmap.hpp"
#include "poseforge/micronet.hpp"
#include "poseforge/oks.hpp"
#include "poseforge/synthdata.hpp"
#include "poseforge/trainer.hpp"

namespace poseforge {

/// Settings used by the original large-scale recipe, kept for reference only;
/// nothing reads them.
struct ReferenceScale {
    double lr = 3e-5;
    const char* optimizer = "adamw";
    int input_w = 192, input_h = 256;
    int gpus = 8;
};

// JSON (de)serialization. Missing keys keep their defaults; unknown keys and
// wrongly typed values throw InvalidConfig naming the key.
NetConfig net_config_from_json(const std::string& text);
std::string net_config_to_json(const NetConfig& c);
TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& c);
AugConfig aug_config_from_json(const std::string& text);
std::string aug_config_to_json(const AugConfig& c);
HeatmapConfig heatmap_config_from_json(const std::string& text);
std::string heatmap_config_to_json(const HeatmapConfig& c);
/// `k` defaults to the skeleton's oks_k when absent.
OksParams oks_params_from_json(const std::string& text, const SkeletonSpec& spec);
std::string oks_params_to_json(const OksParams& p);
StyleParams style_params_from_json(const std::string& text);

struct GlobalConfig {
    SkeletonSpec skeleton = coco17_skeleton();
    NetConfig net;
    TrainConfig train;
    AugConfig aug;
    HeatmapConfig heatmap;
    OksParams oks = OksParams::from_skeleton(coco17_skeleton());
    FigureParams figure;
    StyleParams style = StyleParams::monet_like();
    std::uint64_t seed = 0;
    std::string output_dir = "poseforge_out";
};

/// Reads a top-level config whose entries name the per-module files
/// (relative to the config's directory) plus "seed" and "output_dir".
/// Absent entries use defaults. Throws IoFailure naming a missing file.
GlobalConfig load_global_config(const std::string& path);

/// Lighter augmentation used at micro scale. The full-strength AugConfig
/// defaults leave a 2000-step run underfitting.
AugConfig micro_scale_aug_config();

/// Built-in defaults: 96x128 network input, micro-scale augmentation and a
/// heatmap sized from the network input.
GlobalConfig default_global_config();

/// POSEFORGE_SEED, when set, replaces `seed`. Throws InvalidConfig on a
/// malformed value.
std::uint64_t apply_seed_env(std::uint64_t seed);

} // namespace poseforge
