#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "poseforge/coco_io.hpp"
#include "poseforge/image.hpp"
#include "poseforge/pipeline.hpp"
#include "poseforge/rng.hpp"

namespace poseforge {

enum class Background { Flat, Gradient, Clutter };

using Range = std::pair<double, double>;

struct Rgb {
    float r = 0.0f, g = 0.0f, b = 0.0f;
    bool operator==(const Rgb&) const = default;
};

/// Stick-figure articulation. Lengths are fractions of figure height; angles
/// are degrees, measured from straight down (limbs) or straight up (torso).
struct FigureParams {
    Size image_size{192, 192};
    Range figure_height{112.0, 160.0};
    double limb_thickness = 6.0;
    Range torso_lean{-12.0, 12.0};
    Range upper_arm{-30.0, 150.0};
    Range forearm_bend{-90.0, 90.0};
    Range thigh{-10.0, 35.0};
    Range knee_bend{-50.0, 50.0};
    Range head_turn{-0.6, 0.6};
    double torso_len = 0.30;
    double shoulder_half_width = 0.11;
    double hip_half_width = 0.07;
    double neck_len = 0.10;
    double upper_arm_len = 0.16;
    double forearm_len = 0.14;
    double thigh_len = 0.23;
    double shin_len = 0.22;
    // One colour per skeleton edge; cycled when shorter than the edge list.
    std::vector<Rgb> palette = default_palette();
    std::vector<Background> backgrounds{Background::Flat, Background::Gradient, Background::Clutter};
    int max_figures = 2;

    static std::vector<Rgb> default_palette();
    bool operator==(const FigureParams&) const = default;
};

/// Throws InvalidConfig for non-positive lengths or empty ranges.
void validate_figure_params(const FigureParams& p);

struct StyleParams {
    double hue_degrees = 0.0;
    double saturation = 1.0;
    double blur_sigma = 0.0;
    double noise_amplitude = 0.0;
    std::uint64_t seed = 0;

    static StyleParams neutral() { return {}; }
    static StyleParams monet_like(std::uint64_t seed = 0) { return {75.0, 0.55, 1.2, 0.35, seed}; }
    bool operator==(const StyleParams&) const = default;
};

/// Renders `n_figures` stick figures. Keypoints are exact; v = 0 outside the
/// frame (coordinates zeroed), v = 1 when a later-drawn figure's limb covers
/// the point, v = 2 otherwise. bbox is the labeled-keypoint box padded 10%.
Scene generate_scene(const SkeletonSpec& spec, const FigureParams& params, int n_figures, Rng& rng);

/// Per-pixel colour shift plus a small blur and seeded multiplicative texture;
/// image geometry is untouched.
Image stylize(const Image& img, const StyleParams& style);

double mean_abs_difference(const Image& a, const Image& b);

struct SplitInfo {
    std::string name;
    std::string image_dir;
    std::string annotations;
    int n_images = 0;
    std::uint64_t seed = 0;
};

struct Manifest {
    std::uint64_t seed = 0;
    std::vector<SplitInfo> splits;
    StyleParams style;
    std::string path;

    const SplitInfo& split(const std::string& name) const;
};

/// Writes train/, val/ and val_stylized/ under out_dir plus manifest.json.
/// The stylized split points at val's annotation file. The returned paths are
/// resolved against out_dir. Throws IoFailure.
Manifest build_dataset(const SkeletonSpec& spec, const FigureParams& params, const StyleParams& style, int n_train,
                       int n_val, std::uint64_t seed, const std::string& out_dir);

std::string manifest_to_json(const Manifest& m);
Manifest load_manifest(const std::string& path);

struct LoadedSplit {
    AnnotationFile annotations;
    std::vector<Scene> scenes; // indexed like annotations.images
};

LoadedSplit load_split(const SplitInfo& split, const SkeletonSpec& spec);

} // namespace poseforge
