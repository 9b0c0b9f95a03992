#include "poseforge/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace poseforge {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

void require_size(Size s, const char* what) {
    if (s.w < 2 || s.h < 2)
        throw Error(ErrorCode::DegenerateSize,
                    std::string(what) + " " + std::to_string(s.w) + "x" + std::to_string(s.h) + " (needs >= 2)");
}

} // namespace

void validate_aug_config(const AugConfig& cfg) {
    for (double p : {cfg.flip_prob, cfg.half_body_prob, cfg.rotation_prob, cfg.blur_prob, cfg.median_blur_prob,
                     cfg.dropout_prob})
        if (!is_prob(p)) throw Error(ErrorCode::InvalidConfig, "probabilities must lie in [0, 1]");
    const auto [lo, hi] = cfg.dropout_hole_frac;
    if (!(lo > 0.0 && hi < 1.0 && lo <= hi))
        throw Error(ErrorCode::InvalidConfig, "dropout_hole_frac must satisfy 0 < lo <= hi < 1");
    if (cfg.half_body_min_kpts < 1) throw Error(ErrorCode::InvalidConfig, "half_body_min_kpts must be positive");
    if (!(cfg.scale_jitter.first > 0.0 && cfg.scale_jitter.first <= cfg.scale_jitter.second))
        throw Error(ErrorCode::InvalidConfig, "scale_jitter must be a positive range");
    if (cfg.rotation_jitter.first > cfg.rotation_jitter.second)
        throw Error(ErrorCode::InvalidConfig, "rotation_jitter range is reversed");
    if (!(cfg.blur_sigma.first > 0.0 && cfg.blur_sigma.first <= cfg.blur_sigma.second))
        throw Error(ErrorCode::InvalidConfig, "blur_sigma must be a positive range");
    if (cfg.median_kernels.empty()) throw Error(ErrorCode::InvalidConfig, "median_kernels is empty");
    for (int k : cfg.median_kernels)
        if (k < 1 || k % 2 == 0) throw Error(ErrorCode::InvalidConfig, "median kernels must be odd and positive");
}

bool Affine2D::invertible() const { return std::fabs(det()) > 1e-12; }

Affine2D Affine2D::inverse() const {
    const double d = det();
    if (std::fabs(d) <= 1e-12) throw Error(ErrorCode::DegenerateSize, "affine transform is singular");
    const double a = m[4] / d, b = -m[1] / d, c = -m[3] / d, e = m[0] / d;
    return {{a, b, -(a * m[2] + b * m[5]), c, e, -(c * m[2] + e * m[5])}};
}

Affine2D Affine2D::operator*(const Affine2D& o) const {
    return {{m[0] * o.m[0] + m[1] * o.m[3], m[0] * o.m[1] + m[1] * o.m[4], m[0] * o.m[2] + m[1] * o.m[5] + m[2],
             m[3] * o.m[0] + m[4] * o.m[3], m[3] * o.m[1] + m[4] * o.m[4], m[3] * o.m[2] + m[4] * o.m[5] + m[5]}};
}

Affine2D udp_resize_transform(Size src, Size dst) {
    require_size(src, "source size");
    require_size(dst, "destination size");
    const double sx = static_cast<double>(dst.w - 1) / (src.w - 1);
    const double sy = static_cast<double>(dst.h - 1) / (src.h - 1);
    return {{sx, 0.0, 0.0, 0.0, sy, 0.0}};
}

Affine2D crop_affine(const CropSpec& crop) {
    require_size(crop.output_size, "output size");
    if (!(crop.scale.first > 0.0 && crop.scale.second > 0.0))
        throw Error(ErrorCode::DegenerateSize, "crop scale must be positive");
    const double sx = (crop.output_size.w - 1) / crop.scale.first;
    const double sy = (crop.output_size.h - 1) / crop.scale.second;
    const double c = std::cos(crop.rotation * kDegToRad), s = std::sin(crop.rotation * kDegToRad);
    const double ox = 0.5 * (crop.output_size.w - 1), oy = 0.5 * (crop.output_size.h - 1);
    const auto [cx, cy] = crop.center;
    // p' = S R (p - center) + o
    const double a = sx * c, b = -sx * s, d = sy * s, e = sy * c;
    return {{a, b, ox - (a * cx + b * cy), d, e, oy - (d * cx + e * cy)}};
}

Affine2D crop_affine_inverse(const CropSpec& crop) {
    require_size(crop.output_size, "output size");
    if (!(crop.scale.first > 0.0 && crop.scale.second > 0.0))
        throw Error(ErrorCode::DegenerateSize, "crop scale must be positive");
    const double ix = crop.scale.first / (crop.output_size.w - 1);
    const double iy = crop.scale.second / (crop.output_size.h - 1);
    const double c = std::cos(crop.rotation * kDegToRad), s = std::sin(crop.rotation * kDegToRad);
    const double ox = 0.5 * (crop.output_size.w - 1), oy = 0.5 * (crop.output_size.h - 1);
    const auto [cx, cy] = crop.center;
    // p = R^T S^-1 (p' - o) + center
    const double a = c * ix, b = s * iy, d = -s * ix, e = c * iy;
    return {{a, b, cx - (a * ox + b * oy), d, e, cy - (d * ox + e * oy)}};
}

std::vector<Point> apply_affine_points(const Affine2D& t, const std::vector<Point>& pts) {
    std::vector<Point> out;
    out.reserve(pts.size());
    for (const auto& [x, y] : pts) out.push_back(t.apply(x, y));
    return out;
}

Image warp_image(const Image& img, const Affine2D& t, Size out_size) {
    const Affine2D inv = t.inverse();
    Image out(out_size.w, out_size.h, 0.0f);
    for (int v = 0; v < out_size.h; ++v) {
        for (int u = 0; u < out_size.w; ++u) {
            const auto [sx, sy] = inv.apply(u, v);
            if (!(sx > -1.0 && sy > -1.0 && sx < img.width && sy < img.height)) continue;
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            const double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
            const int xs[4] = {x0, x0 + 1, x0, x0 + 1};
            const int ys[4] = {y0, y0, y0 + 1, y0 + 1};
            for (int ch = 0; ch < 3; ++ch) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) {
                    if (w[k] == 0.0 || xs[k] < 0 || ys[k] < 0 || xs[k] >= img.width || ys[k] >= img.height) continue;
                    acc += w[k] * img.at(xs[k], ys[k], ch);
                }
                out.at(u, v, ch) = static_cast<float>(acc);
            }
        }
    }
    return out;
}

PersonInstance flip_instance(const PersonInstance& inst, int img_width, const SkeletonSpec& spec) {
    const auto perm = flip_index_map(spec);
    const double axis = img_width - 1;
    PersonInstance out = inst;
    for (std::size_t i = 0; i < inst.keypoints.size(); ++i) {
        Keypoint kp = inst.keypoints[i];
        kp.x = axis - kp.x;
        out.keypoints[static_cast<std::size_t>(perm[i])] = kp;
    }
    out.bbox.x = axis - inst.bbox.x - inst.bbox.w;
    return out;
}

Image flip_image(const Image& img) {
    Image out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
    return out;
}

namespace {

Point fit_aspect(double w, double h, Size out) {
    const double aspect = static_cast<double>(out.w) / out.h;
    if (w > aspect * h)
        h = w / aspect;
    else
        w = h * aspect;
    return {w, h};
}

} // namespace

CropSpec bbox_to_crop(const BBox& box, Size output_size, double padding) {
    CropSpec crop;
    crop.center = {box.x + 0.5 * box.w, box.y + 0.5 * box.h};
    const auto [w, h] = fit_aspect(box.w, box.h, output_size);
    crop.scale = {w * padding, h * padding};
    crop.output_size = output_size;
    return crop;
}

CropSpec half_body_crop(const PersonInstance& inst, const SkeletonSpec& spec, const AugConfig& cfg, Size output_size,
                        Rng& rng) {
    const CropSpec full = bbox_to_crop(inst.bbox, output_size);
    const bool pick_upper = rng.uniform() < 0.5;
    if (inst.num_labeled() < cfg.half_body_min_kpts) return full;

    const auto& half = pick_upper ? spec.upper_body : spec.lower_body;
    std::vector<Point> pts;
    for (int i : half) {
        const auto& kp = inst.keypoints[static_cast<std::size_t>(i)];
        if (kp.v > 0) pts.emplace_back(kp.x, kp.y);
    }
    if (pts.size() < 2) return full;

    double sx = 0.0, sy = 0.0;
    double x0 = pts[0].first, x1 = x0, y0 = pts[0].second, y1 = y0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
    }
    const double n = static_cast<double>(pts.size());
    CropSpec crop;
    crop.center = {sx / n, sy / n};
    const auto [w, h] = fit_aspect(std::max(x1 - x0, 1.0), std::max(y1 - y0, 1.0), output_size);
    crop.scale = {w * cfg.half_body_padding, h * cfg.half_body_padding};
    crop.output_size = output_size;
    return crop;
}

Image gaussian_blur(const Image& img, double sigma) {
    if (!(sigma > 0.0)) return img;
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& w : k) w /= sum;

    auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };
    Image tmp(img.width, img.height), out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * img.at(clampi(x + i, img.width), y, c);
                tmp.at(x, y, c) = static_cast<float>(acc);
            }
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, clampi(y + i, img.height), c);
                out.at(x, y, c) = static_cast<float>(acc);
            }
    return out;
}

Image median_blur(const Image& img, int kernel) {
    const int r = kernel / 2;
    Image out(img.width, img.height);
    std::vector<float> window;
    window.reserve(static_cast<std::size_t>(kernel) * kernel);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                window.clear();
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx)
                        window.push_back(img.at(std::clamp(x + dx, 0, img.width - 1),
                                                std::clamp(y + dy, 0, img.height - 1), c));
                auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
                std::nth_element(window.begin(), mid, window.end());
                out.at(x, y, c) = *mid;
            }
    return out;
}

Image augment_appearance(const Image& img, const AugConfig& cfg, Rng& rng) {
    Image out = img;
    // Draws happen unconditionally so the stream position does not depend on
    // which branches fire.
    const bool do_blur = rng.bernoulli(cfg.blur_prob);
    const double sigma = rng.uniform(cfg.blur_sigma.first, cfg.blur_sigma.second);
    const bool do_median = rng.bernoulli(cfg.median_blur_prob);
    const int kernel = cfg.median_kernels[rng.below(cfg.median_kernels.size())];
    const bool do_drop = rng.bernoulli(cfg.dropout_prob);
    const double fw = rng.uniform(cfg.dropout_hole_frac.first, cfg.dropout_hole_frac.second);
    const double fh = rng.uniform(cfg.dropout_hole_frac.first, cfg.dropout_hole_frac.second);
    const double px = rng.uniform(), py = rng.uniform();

    if (do_blur) out = gaussian_blur(out, sigma);
    if (do_median) out = median_blur(out, kernel);
    if (do_drop) {
        auto side = [&](double f, int n) {
            const int lo = static_cast<int>(std::ceil(cfg.dropout_hole_frac.first * n));
            const int hi = static_cast<int>(std::floor(cfg.dropout_hole_frac.second * n));
            return std::clamp(static_cast<int>(std::lround(f * n)), std::max(lo, 1), std::max(hi, 1));
        };
        const int hw = side(fw, out.width), hh = side(fh, out.height);
        const int x0 = static_cast<int>(px * (out.width - hw + 1));
        const int y0 = static_cast<int>(py * (out.height - hh + 1));
        for (int y = y0; y < y0 + hh; ++y)
            for (int x = x0; x < x0 + hw; ++x)
                for (int c = 0; c < 3; ++c) out.at(x, y, c) = 0.0f;
    }
    return out;
}

} // namespace poseforge
