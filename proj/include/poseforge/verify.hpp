#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "poseforge/heatmap.hpp"
#include "poseforge/trainer.hpp"

namespace poseforge {

/// Encoder/decoder pair under test. The default members are the shipped codec.
struct Codec {
    std::function<Heatmap(const PersonInstance&, const HeatmapConfig&, const SkeletonSpec&)> encode =
        [](const PersonInstance& i, const HeatmapConfig& c, const SkeletonSpec& s) { return poseforge::encode(i, c, s); };
    std::function<std::vector<DecodedKeypoint>(const Heatmap&)> decode_hm = [](const Heatmap& h) {
        return decode_heatmap_coords(h);
    };
};

struct CodecReport {
    int n = 0;
    double max_error = 0.0;  // heatmap pixels
    double mean_error = 0.0; // heatmap pixels
};

/// encode -> decode for n random fractional keypoints per sigma, drawn at
/// least 2 heatmap pixels from the border.
CodecReport codec_roundtrip(int n, std::uint64_t seed, const std::vector<double>& sigmas,
                            const Codec& codec = {}, Size input_size = {192, 256});

/// encode -> flip_heatmap -> decode against the mirrored keypoint, error in
/// input-image pixels.
CodecReport flip_consistency(int n, std::uint64_t seed, const SkeletonSpec& spec, const Codec& codec = {},
                             Size input_size = {192, 256}, double sigma = 2.0);

/// Gradient check of the multitask loss on the tiny network with a random
/// image and target. With `corrupt` the analytic gradient of one block is
/// perturbed before comparison, which the check must flag.
GradcheckReport gradcheck_tiny(std::uint64_t seed, bool corrupt = false, const GradcheckOptions& opts = {});

std::string gradcheck_report_text(const GradcheckReport& r, std::size_t max_rows = 0);

} // namespace poseforge
