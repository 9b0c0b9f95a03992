#include "poseforge/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace poseforge {

namespace {

SkeletonSpec single_point_spec() {
    SkeletonSpec s;
    s.name = "single";
    s.K = 1;
    s.oks_k = {0.1};
    return s;
}

} // namespace

CodecReport codec_roundtrip(int n, std::uint64_t seed, const std::vector<double>& sigmas, const Codec& codec,
                            Size input_size) {
    const SkeletonSpec spec = single_point_spec();
    CodecReport rep;
    double sum = 0.0;
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        const HeatmapConfig cfg = make_heatmap_config(input_size, sigmas[si]);
        const double Wm = cfg.heatmap_size.w - 1.0, Hm = cfg.heatmap_size.h - 1.0;
        Rng rng(derive_seed(seed, si));
        for (int i = 0; i < n; ++i) {
            const double u = rng.uniform(2.0, Wm - 2.0), v = rng.uniform(2.0, Hm - 2.0);
            PersonInstance inst;
            inst.keypoints = {{u * (input_size.w - 1.0) / Wm, v * (input_size.h - 1.0) / Hm, 2}};
            inst.bbox = {0.0, 0.0, static_cast<double>(input_size.w), static_cast<double>(input_size.h)};
            inst.area = inst.bbox.w * inst.bbox.h;
            const auto d = codec.decode_hm(codec.encode(inst, cfg, spec));
            const double err = std::hypot(d[0].x - u, d[0].y - v);
            rep.max_error = std::max(rep.max_error, err);
            sum += err;
            ++rep.n;
        }
    }
    rep.mean_error = rep.n ? sum / rep.n : 0.0;
    return rep;
}

CodecReport flip_consistency(int n, std::uint64_t seed, const SkeletonSpec& spec, const Codec& codec,
                             Size input_size, double sigma) {
    const HeatmapConfig cfg = make_heatmap_config(input_size, sigma);
    const auto perm = flip_index_map(spec);
    const double sx = (input_size.w - 1.0) / (cfg.heatmap_size.w - 1.0);
    const double sy = (input_size.h - 1.0) / (cfg.heatmap_size.h - 1.0);
    CodecReport rep;
    double sum = 0.0;
    Rng rng(seed);
    int done = 0;
    while (done < n) {
        PersonInstance inst;
        for (int k = 0; k < spec.K; ++k)
            inst.keypoints.push_back({rng.uniform(2.0 * sx, input_size.w - 1.0 - 2.0 * sx),
                                      rng.uniform(2.0 * sy, input_size.h - 1.0 - 2.0 * sy), 2});
        inst.bbox = {0.0, 0.0, static_cast<double>(input_size.w), static_cast<double>(input_size.h)};
        inst.area = inst.bbox.w * inst.bbox.h;
        const auto d = codec.decode_hm(flip_heatmap(codec.encode(inst, cfg, spec), spec));
        for (int k = 0; k < spec.K && done < n; ++k, ++done) {
            // Channel k of the flipped map holds the mirror of keypoint perm[k].
            const Keypoint& src = inst.keypoints[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
            const double ex = input_size.w - 1.0 - src.x, ey = src.y;
            const double err = std::hypot(d[static_cast<std::size_t>(k)].x * sx - ex,
                                          d[static_cast<std::size_t>(k)].y * sy - ey);
            rep.max_error = std::max(rep.max_error, err);
            sum += err;
            ++rep.n;
        }
    }
    rep.mean_error = rep.n ? sum / rep.n : 0.0;
    return rep;
}

GradcheckReport gradcheck_tiny(std::uint64_t seed, bool corrupt, const GradcheckOptions& opts) {
    const NetConfig nc = tiny_net_config(3);
    MicroUNet net(nc, derive_seed(seed, 1));
    Rng rng(derive_seed(seed, 2));
    Image img(nc.input_size.w, nc.input_size.h);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const HeatmapConfig hm_cfg = make_heatmap_config(nc.input_size, 1.5);
    Heatmap target(nc.K, hm_cfg);
    for (auto& v : target.data) v = rng.uniform();
    const std::vector<bool> mask{true, false, true};
    TrainConfig tc;
    tc.w_rgb = 0.7;
    tc.w_pose = 1.3;

    std::vector<nn::Parameter*> params;
    for (auto& p : net.parameters())
        if (p.trainable) params.push_back(&p);
    auto loss = [&] { return multitask_loss(net, img, target, mask, tc)->loss_total; };
    auto analytic = [&] {
        auto ctx = multitask_loss(net, img, target, mask, tc);
        backward(*ctx);
        if (corrupt)
            for (auto* p : params)
                if (p->name.rfind("pose_head.", 0) == 0) {
                    for (auto& g : p->grad.data) g = 1.5 * g + 1e-3;
                    break;
                }
    };
    return gradcheck(params, loss, analytic, opts);
}

std::string gradcheck_report_text(const GradcheckReport& r, std::size_t max_rows) {
    std::ostringstream os;
    char buf[160];
    std::size_t rows = 0;
    for (const auto& e : r.entries) {
        if (max_rows && rows++ >= max_rows) break;
        std::snprintf(buf, sizeof buf, "%-36s rel %.3e  abs %.3e  n=%zu\n", e.name.c_str(), e.max_rel_error,
                      e.max_abs_error, e.checked);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "max relative error %.3e over %zu blocks\n", r.max_rel_error, r.entries.size());
    os << buf;
    return os.str();
}

} // namespace poseforge
