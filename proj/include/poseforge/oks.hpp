#pragma once

#include <string>
#include <vector>

#include "poseforge/coco_io.hpp"
#include "poseforge/core.hpp"

namespace poseforge {

struct OksParams {
    std::vector<double> k;
    std::vector<double> thresholds = default_thresholds();
    int max_dets = 20;
    int recall_points = 101;

    static std::vector<double> default_thresholds();
    static OksParams from_skeleton(const SkeletonSpec& spec);
    bool operator==(const OksParams&) const = default;
};

/// Throws InvalidConfig.
void validate_oks_params(const OksParams& params);

/// exp(-d^2 / (2 s^2 k^2)) averaged over gt keypoints with v > 0, s = sqrt(gt.area).
double oks(const PersonInstance& gt, const PersonInstance& pred, const OksParams& params);

struct Match {
    int pred = 0;
    int gt = -1; // -1: false positive
    double oks = 0.0;
};

/// Greedy protocol: predictions in descending score order (index breaks ties)
/// each claim the unclaimed gt with the highest OKS, if that OKS reaches the
/// threshold. Ground truths without labeled keypoints are never matched.
std::vector<Match> match_image(const std::vector<PersonInstance>& gts, const std::vector<PersonInstance>& preds,
                               double threshold, const OksParams& params);

struct ImageMatches {
    long long image_id = 0;
    std::vector<Match> matches; // at the first threshold
};

struct EvalReport {
    double ap = 0.0;
    double ar = 0.0;
    std::vector<double> thresholds;
    std::vector<double> ap_per_threshold;
    std::vector<double> ar_per_threshold;
    std::vector<std::vector<double>> precision_at_recall; // per threshold, recall_points entries
    std::vector<ImageMatches> per_image_matches;
    long long num_gt = 0;
    long long num_pred = 0;

    /// Entry of ap_per_threshold whose threshold equals t (within 1e-9), or -1.
    double ap_at(double t) const;
    double ar_at(double t) const;
};

/// Predictions are result entries; their third triplet entries are ignored.
EvalReport evaluate(const AnnotationFile& gt_file, const ResultFile& result_file, const OksParams& params);
EvalReport evaluate(const AnnotationFile& gt_file, const std::vector<PersonInstance>& preds, const OksParams& params);

std::string report_to_json(const EvalReport& report);
/// Aligned table with AP, AP50, AP75, AR, AR50 columns.
std::string report_to_table(const std::vector<std::pair<std::string, EvalReport>>& rows);
/// PR curves, one polyline per threshold.
std::string report_to_svg(const EvalReport& report);

} // namespace poseforge
