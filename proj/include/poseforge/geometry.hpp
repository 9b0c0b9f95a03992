#pragma once

#include <array>
#include <utility>
#include <vector>

#include "poseforge/core.hpp"
#include "poseforge/image.hpp"
#include "poseforge/rng.hpp"

namespace poseforge {

using Point = std::pair<double, double>;

/// Row-major 2x3 matrix [a b c; d e f] mapping (x, y) to (a x + b y + c, d x + e y + f).
struct Affine2D {
    std::array<double, 6> m{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};

    static Affine2D identity() { return {}; }
    static Affine2D translation(double tx, double ty) { return {{1.0, 0.0, tx, 0.0, 1.0, ty}}; }

    double det() const { return m[0] * m[4] - m[1] * m[3]; }
    bool invertible() const;
    Point apply(double x, double y) const { return {m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5]}; }
    Affine2D inverse() const;

    /// this after other: (this * other)(p) = this(other(p)).
    Affine2D operator*(const Affine2D& other) const;
    bool operator==(const Affine2D&) const = default;
};

struct CropSpec {
    Point center{0.0, 0.0};
    Point scale{1.0, 1.0}; // crop window extent in source pixels
    double rotation = 0.0; // degrees
    Size output_size{2, 2};

    bool operator==(const CropSpec&) const = default;
};

struct AugConfig {
    double flip_prob = 0.5;
    double half_body_prob = 0.3;
    int half_body_min_kpts = 8;
    double half_body_padding = 1.5;
    std::pair<double, double> scale_jitter{0.5, 1.5};
    double rotation_prob = 0.6;
    std::pair<double, double> rotation_jitter{-40.0, 40.0};
    double blur_prob = 0.1;
    std::pair<double, double> blur_sigma{0.1, 2.0};
    double median_blur_prob = 0.1;
    std::vector<int> median_kernels{3, 5};
    double dropout_prob = 1.0;
    std::pair<double, double> dropout_hole_frac{0.2, 0.4};

    bool operator==(const AugConfig&) const = default;
};

/// Throws InvalidConfig when a probability or range is out of bounds.
void validate_aug_config(const AugConfig& cfg);

/// Corner-aligned resize: x' = x (W'-1)/(W-1), y' = y (H'-1)/(H-1).
Affine2D udp_resize_transform(Size src, Size dst);

/// Maps the rotated crop window onto the output grid so that the window
/// center lands on ((W-1)/2, (H-1)/2) and the window extent spans W-1 by H-1.
Affine2D crop_affine(const CropSpec& crop);
/// Analytic inverse of crop_affine.
Affine2D crop_affine_inverse(const CropSpec& crop);

std::vector<Point> apply_affine_points(const Affine2D& t, const std::vector<Point>& pts);

/// Inverse-mapped bilinear warp. Taps outside the source contribute zero.
Image warp_image(const Image& img, const Affine2D& t, Size out_size);

PersonInstance flip_instance(const PersonInstance& inst, int img_width, const SkeletonSpec& spec);
Image flip_image(const Image& img);

/// Box center and extent expanded by `padding` and widened or heightened to
/// the output aspect ratio.
CropSpec bbox_to_crop(const BBox& box, Size output_size, double padding = 1.25);

CropSpec half_body_crop(const PersonInstance& inst, const SkeletonSpec& spec, const AugConfig& cfg, Size output_size,
                        Rng& rng);

Image gaussian_blur(const Image& img, double sigma);
Image median_blur(const Image& img, int kernel);

Image augment_appearance(const Image& img, const AugConfig& cfg, Rng& rng);

} // namespace poseforge
