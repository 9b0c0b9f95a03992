#pragma once

#include <cstdint>

#include "poseforge/oks.hpp"
#include "poseforge/rng.hpp"

namespace poseforge {

/// Exhaustive evaluator used to cross-check evaluate(). Per image and
/// threshold it enumerates every injective partial assignment of predictions
/// to ground truths and keeps the one that is lexicographically best in
/// score order (OKS first, lower gt index on ties). The PR curve is then
/// integrated point by point: p(r) = max precision at recall >= r.
/// Exponential in instance count; meant for scenes of at most ~6 per side.
EvalReport evaluate_bruteforce(const AnnotationFile& gt_file, const std::vector<PersonInstance>& preds,
                               const OksParams& params);

struct OracleCase {
    AnnotationFile gt;
    std::vector<PersonInstance> preds;
};

/// Small random evaluation scene: a few images with up to `max_per_side`
/// ground truths and predictions each, predictions jittered around gts or
/// placed at random, scores quantized so ties occur.
OracleCase random_oracle_case(Rng& rng, const SkeletonSpec& spec, int max_per_side = 4);

/// Single gt, single prediction at OKS 0.72: matched below 0.75 only.
OracleCase ladder_case(const SkeletonSpec& spec);

struct SelftestResult {
    int cases = 0;
    int mismatches = 0;
    double ladder_ap = 0.0;
    double ladder_ar = 0.0;
    std::string first_failure;

    bool ok() const { return mismatches == 0 && ladder_ap == 0.5 && ladder_ar == 0.5; }
};

SelftestResult oks_selftest(int n_cases, std::uint64_t seed, const SkeletonSpec& spec);

} // namespace poseforge
