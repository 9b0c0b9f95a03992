#pragma once

#include <string>
#include <vector>

#include "poseforge/core.hpp"
#include "poseforge/image.hpp"

namespace poseforge {

struct HeatmapConfig {
    Size input_size{48, 64};
    Size heatmap_size{12, 16};
    double sigma = 2.0; // heatmap pixels
    bool supervise_occluded = true;

    bool operator==(const HeatmapConfig&) const = default;
};

/// Config with heatmap_size = input_size / 4. Throws InvalidConfig when the
/// input is not divisible by 4 or sigma is not positive.
HeatmapConfig make_heatmap_config(Size input_size, double sigma = 2.0, bool supervise_occluded = true);
void validate_heatmap_config(const HeatmapConfig& cfg);

struct Heatmap {
    int K = 0;
    HeatmapConfig config;
    std::vector<double> data; // K x H' x W', row-major
    std::vector<int> outside_grid; // channels zeroed because the keypoint fell > 3 sigma off the grid

    Heatmap() = default;
    Heatmap(int k, const HeatmapConfig& cfg)
        : K(k), config(cfg), data(static_cast<std::size_t>(k) * cfg.heatmap_size.w * cfg.heatmap_size.h, 0.0) {}

    int width() const { return config.heatmap_size.w; }
    int height() const { return config.heatmap_size.h; }
    std::size_t plane() const { return static_cast<std::size_t>(width()) * height(); }
    double& at(int k, int v, int u) { return data[k * plane() + static_cast<std::size_t>(v) * width() + u]; }
    double at(int k, int v, int u) const { return data[k * plane() + static_cast<std::size_t>(v) * width() + u]; }
    bool channel_is_zero(int k) const;
};

/// Whether keypoint i contributes a target under this config.
bool is_supervised(const Keypoint& kp, const HeatmapConfig& cfg);

Heatmap encode(const PersonInstance& inst, const HeatmapConfig& cfg, const SkeletonSpec& spec);

struct DecodedKeypoint {
    double x = 0.0; // input-image pixels
    double y = 0.0;
    double confidence = 0.0;
};

struct DecodeOptions {
    bool refine = true;
};

/// Per channel: integer argmax, one Newton step on the log heatmap using the
/// 3x3 finite-difference gradient and Hessian, then the inverse UDP resize.
std::vector<DecodedKeypoint> decode(const Heatmap& hm, DecodeOptions opts = {});

/// Same as decode but in heatmap coordinates.
std::vector<DecodedKeypoint> decode_heatmap_coords(const Heatmap& hm, DecodeOptions opts = {});

Heatmap flip_heatmap(const Heatmap& hm, const SkeletonSpec& spec);

/// Little-endian blob: int32 K, int32 W', int32 H', float32 sigma, then
/// K*H'*W' float32 values.
std::string serialize_heatmap(const Heatmap& hm);
Heatmap deserialize_heatmap(const std::string& bytes);

} // namespace poseforge
