#pragma once

#include <vector>

#include "poseforge/coco_io.hpp"
#include "poseforge/geometry.hpp"
#include "poseforge/heatmap.hpp"
#include "poseforge/micronet.hpp"

namespace poseforge {

/// A scene image with its annotated people.
struct Scene {
    Image image;
    std::vector<PersonInstance> people;
};

/// One top-down training example: the warped crop, its keypoints in crop
/// coordinates, the target heatmap and the channel supervision mask.
struct TrainSample {
    Image input;
    PersonInstance target;
    Heatmap heatmap;
    std::vector<bool> mask;
};

/// Crop, optionally augment (flip, half-body, scale/rotation jitter, then the
/// appearance ops) and encode. The number of draws from `rng` is fixed, so the
/// stream does not depend on which branches fire.
TrainSample make_train_sample(const Image& scene, const PersonInstance& inst, const SkeletonSpec& spec,
                              const AugConfig& aug, const HeatmapConfig& hm_cfg, Rng& rng, bool augment);

/// Supervision mask for a heatmap target: supervised and on the grid.
std::vector<bool> supervision_mask(const PersonInstance& target, const Heatmap& hm);

Heatmap tensor_to_heatmap(const nn::Tensor& t, const HeatmapConfig& cfg);

struct Prediction {
    PersonInstance instance; // keypoints in scene coordinates, v = 2
    std::vector<double> confidence;
};

/// Single-step top-down inference for one box. With flip_test the heatmap is
/// averaged with the flipped heatmap of the flipped crop. The instance score
/// is mean keypoint confidence (clamped to [0, 1]) times det_score.
Prediction predict_instance(MicroUNet& net, const Image& scene, const BBox& box, const SkeletonSpec& spec,
                            const HeatmapConfig& hm_cfg, bool flip_test = false, double det_score = 1.0);

/// Oracle "prediction": the gt keypoints encoded in their crop, decoded and
/// mapped back to the scene. Score 1.
Prediction gt_roundtrip_instance(const PersonInstance& gt, const SkeletonSpec& spec, const HeatmapConfig& hm_cfg);

KeypointResult prediction_to_result(const Prediction& p, long long category_id = 1);

/// Fraction of labeled gt keypoints within t * max(bbox.w, bbox.h) of the
/// prediction. gts and preds are paired by index.
double pck(const std::vector<PersonInstance>& gts, const std::vector<PersonInstance>& preds, double t);

} // namespace poseforge
