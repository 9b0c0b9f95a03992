#include "poseforge/heatmap.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>

#include "poseforge/geometry.hpp"

namespace poseforge {

static_assert(std::endian::native == std::endian::little, "blob formats assume a little-endian host");

namespace {

constexpr double kClampBelow = 1e-12;
constexpr double kLogFloor = 1e-10;

} // namespace

void validate_heatmap_config(const HeatmapConfig& cfg) {
    if (cfg.input_size.w <= 0 || cfg.input_size.h <= 0 || cfg.input_size.w % 4 != 0 || cfg.input_size.h % 4 != 0)
        throw Error(ErrorCode::InvalidConfig, "input size must be positive and divisible by 4");
    if (cfg.heatmap_size.w != cfg.input_size.w / 4 || cfg.heatmap_size.h != cfg.input_size.h / 4)
        throw Error(ErrorCode::InvalidConfig, "heatmap size must be input size / 4");
    if (!(cfg.sigma > 0.0)) throw Error(ErrorCode::InvalidConfig, "sigma must be positive");
}

HeatmapConfig make_heatmap_config(Size input_size, double sigma, bool supervise_occluded) {
    HeatmapConfig cfg{input_size, {input_size.w / 4, input_size.h / 4}, sigma, supervise_occluded};
    validate_heatmap_config(cfg);
    return cfg;
}

bool Heatmap::channel_is_zero(int k) const {
    const auto first = data.begin() + static_cast<std::ptrdiff_t>(k * plane());
    return std::all_of(first, first + static_cast<std::ptrdiff_t>(plane()), [](double v) { return v == 0.0; });
}

bool is_supervised(const Keypoint& kp, const HeatmapConfig& cfg) {
    return kp.v == 2 || (kp.v == 1 && cfg.supervise_occluded);
}

Heatmap encode(const PersonInstance& inst, const HeatmapConfig& cfg, const SkeletonSpec& spec) {
    if (static_cast<int>(inst.keypoints.size()) != spec.K)
        throw Error(ErrorCode::KeypointCountMismatch, "instance does not match skeleton");
    Heatmap hm(spec.K, cfg);
    const Affine2D to_grid = udp_resize_transform(cfg.input_size, cfg.heatmap_size);
    const int W = cfg.heatmap_size.w, H = cfg.heatmap_size.h;
    const double reach = 3.0 * cfg.sigma;
    const double inv2s2 = 1.0 / (2.0 * cfg.sigma * cfg.sigma);

    for (int k = 0; k < spec.K; ++k) {
        const Keypoint& kp = inst.keypoints[static_cast<std::size_t>(k)];
        if (!is_supervised(kp, cfg)) continue;
        const auto [mx, my] = to_grid.apply(kp.x, kp.y);
        if (mx < -reach || my < -reach || mx > W - 1 + reach || my > H - 1 + reach) {
            hm.outside_grid.push_back(k);
            continue;
        }
        for (int v = 0; v < H; ++v) {
            for (int u = 0; u < W; ++u) {
                const double du = u - mx, dv = v - my;
                const double val = std::exp(-(du * du + dv * dv) * inv2s2);
                hm.at(k, v, u) = val < kClampBelow ? 0.0 : val;
            }
        }
    }
    return hm;
}

std::vector<DecodedKeypoint> decode_heatmap_coords(const Heatmap& hm, DecodeOptions opts) {
    const int W = hm.width(), H = hm.height();
    std::vector<DecodedKeypoint> out(static_cast<std::size_t>(hm.K));
    for (int k = 0; k < hm.K; ++k) {
        int bu = 0, bv = 0;
        double best = hm.at(k, 0, 0);
        bool all_zero = true;
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) {
                const double val = hm.at(k, v, u);
                if (val != 0.0) all_zero = false;
                if (val > best) {
                    best = val;
                    bu = u;
                    bv = v;
                }
            }
        if (all_zero) continue; // (0, 0, 0)

        double x = bu, y = bv;
        const bool interior = bu > 0 && bv > 0 && bu < W - 1 && bv < H - 1;
        if (opts.refine && interior) {
            auto L = [&](int du, int dv) { return std::log(std::max(hm.at(k, bv + dv, bu + du), kLogFloor)); };
            const double c = L(0, 0);
            const double gx = 0.5 * (L(1, 0) - L(-1, 0));
            const double gy = 0.5 * (L(0, 1) - L(0, -1));
            const double hxx = L(1, 0) - 2.0 * c + L(-1, 0);
            const double hyy = L(0, 1) - 2.0 * c + L(0, -1);
            const double hxy = 0.25 * (L(1, 1) - L(1, -1) - L(-1, 1) + L(-1, -1));
            const double det = hxx * hyy - hxy * hxy;
            // Only step when the local fit is a proper maximum.
            if (hxx < 0.0 && det > 1e-12) {
                const double ox = -(hyy * gx - hxy * gy) / det;
                const double oy = -(hxx * gy - hxy * gx) / det;
                x += std::clamp(ox, -1.0, 1.0);
                y += std::clamp(oy, -1.0, 1.0);
            }
        }
        out[static_cast<std::size_t>(k)] = {x, y, best};
    }
    return out;
}

std::vector<DecodedKeypoint> decode(const Heatmap& hm, DecodeOptions opts) {
    auto kps = decode_heatmap_coords(hm, opts);
    const Affine2D to_image = udp_resize_transform(hm.config.heatmap_size, hm.config.input_size);
    for (auto& kp : kps) {
        if (kp.confidence == 0.0 && kp.x == 0.0 && kp.y == 0.0) continue;
        const auto [x, y] = to_image.apply(kp.x, kp.y);
        kp.x = x;
        kp.y = y;
    }
    return kps;
}

Heatmap flip_heatmap(const Heatmap& hm, const SkeletonSpec& spec) {
    if (hm.K != spec.K) throw Error(ErrorCode::KeypointCountMismatch, "heatmap channels do not match skeleton");
    const auto perm = flip_index_map(spec);
    Heatmap out(hm.K, hm.config);
    const int W = hm.width(), H = hm.height();
    for (int k = 0; k < hm.K; ++k)
        for (int v = 0; v < H; ++v)
            for (int u = 0; u < W; ++u) out.at(perm[k], v, W - 1 - u) = hm.at(k, v, u);
    for (int k : hm.outside_grid) out.outside_grid.push_back(perm[k]);
    std::sort(out.outside_grid.begin(), out.outside_grid.end());
    return out;
}

namespace {

template <typename T>
void put(std::string& s, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw Error(ErrorCode::IoFailure, "truncated heatmap blob");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

std::string serialize_heatmap(const Heatmap& hm) {
    std::string out;
    out.reserve(16 + hm.data.size() * 4);
    put<std::int32_t>(out, hm.K);
    put<std::int32_t>(out, hm.width());
    put<std::int32_t>(out, hm.height());
    put<float>(out, static_cast<float>(hm.config.sigma));
    for (double v : hm.data) put<float>(out, static_cast<float>(v));
    return out;
}

Heatmap deserialize_heatmap(const std::string& bytes) {
    std::size_t pos = 0;
    const int K = get<std::int32_t>(bytes, pos);
    const int W = get<std::int32_t>(bytes, pos);
    const int H = get<std::int32_t>(bytes, pos);
    const float sigma = get<float>(bytes, pos);
    if (K <= 0 || W <= 0 || H <= 0) throw Error(ErrorCode::IoFailure, "bad heatmap blob header");
    HeatmapConfig cfg{{W * 4, H * 4}, {W, H}, sigma, true};
    Heatmap hm(K, cfg);
    if (bytes.size() != pos + hm.data.size() * 4) throw Error(ErrorCode::IoFailure, "heatmap blob size mismatch");
    for (auto& v : hm.data) v = get<float>(bytes, pos);
    return hm;
}

} // namespace poseforge
