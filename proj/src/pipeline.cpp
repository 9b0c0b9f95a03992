#include "poseforge/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace poseforge {

std::vector<bool> supervision_mask(const PersonInstance& target, const Heatmap& hm) {
    std::vector<bool> mask(static_cast<std::size_t>(hm.K), false);
    for (int k = 0; k < hm.K; ++k)
        mask[static_cast<std::size_t>(k)] = is_supervised(target.keypoints[static_cast<std::size_t>(k)], hm.config);
    for (int k : hm.outside_grid) mask[static_cast<std::size_t>(k)] = false;
    return mask;
}

TrainSample make_train_sample(const Image& scene, const PersonInstance& inst, const SkeletonSpec& spec,
                              const AugConfig& aug, const HeatmapConfig& hm_cfg, Rng& rng, bool augment) {
    const Size out = hm_cfg.input_size;

    const bool do_flip = rng.bernoulli(aug.flip_prob);
    const bool do_half = rng.bernoulli(aug.half_body_prob);
    Rng half_rng(rng.next());
    const double scale = rng.uniform(aug.scale_jitter.first, aug.scale_jitter.second);
    const bool do_rot = rng.bernoulli(aug.rotation_prob);
    const double rot = rng.uniform(aug.rotation_jitter.first, aug.rotation_jitter.second);
    Rng appearance_rng(rng.next());

    const Image* src = &scene;
    Image flipped;
    PersonInstance person = inst;
    if (augment && do_flip) {
        flipped = flip_image(scene);
        src = &flipped;
        person = flip_instance(inst, scene.width, spec);
    }

    CropSpec crop = bbox_to_crop(person.bbox, out);
    if (augment) {
        if (do_half) crop = half_body_crop(person, spec, aug, out, half_rng);
        crop.scale = {crop.scale.first * scale, crop.scale.second * scale};
        if (do_rot) crop.rotation = rot;
    }

    const Affine2D t = crop_affine(crop);
    TrainSample s;
    s.input = warp_image(*src, t, out);
    if (augment) s.input = augment_appearance(s.input, aug, appearance_rng);
    s.target = person;
    for (auto& kp : s.target.keypoints) {
        const auto [x, y] = t.apply(kp.x, kp.y);
        kp.x = x;
        kp.y = y;
    }
    s.heatmap = encode(s.target, hm_cfg, spec);
    s.mask = supervision_mask(s.target, s.heatmap);
    return s;
}

Heatmap tensor_to_heatmap(const nn::Tensor& t, const HeatmapConfig& cfg) {
    if (t.height() != cfg.heatmap_size.h || t.width() != cfg.heatmap_size.w)
        throw Error(ErrorCode::ShapeMismatch, "network output does not match the heatmap size");
    Heatmap hm(t.channels(), cfg);
    hm.data = t.data;
    return hm;
}

Prediction predict_instance(MicroUNet& net, const Image& scene, const BBox& box, const SkeletonSpec& spec,
                            const HeatmapConfig& hm_cfg, bool flip_test, double det_score) {
    const CropSpec crop = bbox_to_crop(box, hm_cfg.input_size);
    const Affine2D t = crop_affine(crop);
    const Image input = warp_image(scene, t, hm_cfg.input_size);
    Heatmap hm = tensor_to_heatmap(net.predict(input, Task::Pose), hm_cfg);
    if (flip_test) {
        const Heatmap back =
            flip_heatmap(tensor_to_heatmap(net.predict(flip_image(input), Task::Pose), hm_cfg), spec);
        for (std::size_t i = 0; i < hm.data.size(); ++i) hm.data[i] = 0.5 * (hm.data[i] + back.data[i]);
    }
    const auto kps = decode(hm);
    const Affine2D inv = crop_affine_inverse(crop);

    Prediction p;
    p.instance.keypoints.resize(kps.size());
    double conf_sum = 0.0;
    for (std::size_t i = 0; i < kps.size(); ++i) {
        const auto [x, y] = inv.apply(kps[i].x, kps[i].y);
        p.instance.keypoints[i] = {x, y, 2};
        p.confidence.push_back(kps[i].confidence);
        conf_sum += kps[i].confidence;
    }
    const double mean_conf = kps.empty() ? 0.0 : conf_sum / static_cast<double>(kps.size());
    p.instance.score = std::clamp(mean_conf, 0.0, 1.0) * det_score;
    p.instance.bbox = box;
    p.instance.area = box.w * box.h;
    return p;
}

Prediction gt_roundtrip_instance(const PersonInstance& gt, const SkeletonSpec& spec, const HeatmapConfig& hm_cfg) {
    const CropSpec crop = bbox_to_crop(gt.bbox, hm_cfg.input_size);
    const Affine2D t = crop_affine(crop);
    PersonInstance local = gt;
    for (auto& kp : local.keypoints) {
        const auto [x, y] = t.apply(kp.x, kp.y);
        kp.x = x;
        kp.y = y;
    }
    const auto kps = decode(encode(local, hm_cfg, spec));
    const Affine2D inv = crop_affine_inverse(crop);
    Prediction p;
    p.instance = gt;
    p.instance.score = 1.0;
    for (std::size_t i = 0; i < kps.size(); ++i) {
        const auto [x, y] = inv.apply(kps[i].x, kps[i].y);
        p.instance.keypoints[i] = {x, y, 2};
        p.confidence.push_back(kps[i].confidence);
    }
    return p;
}

KeypointResult prediction_to_result(const Prediction& p, long long category_id) {
    KeypointResult r;
    r.image_id = p.instance.image_id;
    r.category_id = category_id;
    r.score = p.instance.score;
    for (std::size_t i = 0; i < p.instance.keypoints.size(); ++i) {
        r.keypoints.push_back(p.instance.keypoints[i].x);
        r.keypoints.push_back(p.instance.keypoints[i].y);
        r.keypoints.push_back(p.confidence[i]);
    }
    return r;
}

double pck(const std::vector<PersonInstance>& gts, const std::vector<PersonInstance>& preds, double t) {
    if (gts.size() != preds.size()) throw Error(ErrorCode::SizeMismatch, "pck needs paired instances");
    long long hit = 0, total = 0;
    for (std::size_t i = 0; i < gts.size(); ++i) {
        const double radius = t * std::max(gts[i].bbox.w, gts[i].bbox.h);
        for (std::size_t k = 0; k < gts[i].keypoints.size(); ++k) {
            const auto& g = gts[i].keypoints[k];
            if (g.v <= 0) continue;
            const auto& p = preds[i].keypoints[k];
            ++total;
            if (std::hypot(p.x - g.x, p.y - g.y) <= radius) ++hit;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

} // namespace poseforge
