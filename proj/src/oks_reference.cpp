#include "poseforge/oks_reference.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>


namespace poseforge {

namespace {

double ks_mean(const PersonInstance& gt, const PersonInstance& pred, const std::vector<double>& k) {
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < gt.keypoints.size(); ++i) {
        if (gt.keypoints[i].v <= 0) continue;
        const double dx = gt.keypoints[i].x - pred.keypoints[i].x;
        const double dy = gt.keypoints[i].y - pred.keypoints[i].y;
        sum += std::exp(-(dx * dx + dy * dy) / (2.0 * gt.area * k[i] * k[i]));
        ++n;
    }
    return sum / n;
}

// Best assignment for one image: assign[p] = gt index or -1, p in score order.
std::vector<int> best_assignment(const std::vector<std::vector<double>>& oks_table, double thr) {
    const std::size_t P = oks_table.size();
    const std::size_t G = P == 0 ? 0 : oks_table[0].size();
    std::vector<int> cur(P, -1), best;
    std::vector<bool> used(G, false);
    // (oks, -gt) per prediction, compared lexicographically; unmatched ranks lowest.
    auto key = [&](const std::vector<int>& a) {
        std::vector<std::pair<double, int>> v;
        for (std::size_t p = 0; p < P; ++p)
            v.push_back(a[p] < 0 ? std::make_pair(-1.0, 0) : std::make_pair(oks_table[p][a[p]], -a[p]));
        return v;
    };
    std::function<void(std::size_t)> rec = [&](std::size_t p) {
        if (p == P) {
            if (best.empty() || key(cur) > key(best)) best = cur;
            return;
        }
        cur[p] = -1;
        rec(p + 1);
        for (std::size_t g = 0; g < G; ++g) {
            if (used[g] || oks_table[p][g] < thr) continue;
            used[g] = true;
            cur[p] = static_cast<int>(g);
            rec(p + 1);
            used[g] = false;
            cur[p] = -1;
        }
    };
    rec(0);
    return best;
}

} // namespace

EvalReport evaluate_bruteforce(const AnnotationFile& gt_file, const std::vector<PersonInstance>& preds,
                               const OksParams& params) {
    std::map<long long, std::vector<PersonInstance>> gts, dts;
    for (const auto& im : gt_file.images) gts[im.id];
    long long num_gt = 0;
    for (const auto& a : gt_file.annotations) {
        if (a.num_labeled() == 0) continue; // never matchable, never counted
        gts[a.image_id].push_back(a);
        ++num_gt;
    }
    if (num_gt == 0) throw Error(ErrorCode::EmptyGroundTruth, "no ground truth with labeled keypoints");
    for (const auto& p : preds) {
        if (!gts.count(p.image_id)) throw Error(ErrorCode::ImageIdMismatch, "unknown image id");
        dts[p.image_id].push_back(p);
    }
    for (auto& [id, list] : dts) {
        std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
        if (list.size() > static_cast<std::size_t>(params.max_dets)) list.resize(static_cast<std::size_t>(params.max_dets));
    }

    EvalReport rep;
    rep.thresholds = params.thresholds;
    rep.num_gt = num_gt;
    for (double thr : params.thresholds) {
        std::vector<std::pair<double, bool>> ranked; // (score, tp) in image order, then score order
        for (const auto& [id, g] : gts) {
            const auto it = dts.find(id);
            if (it == dts.end()) continue;
            std::vector<std::vector<double>> table(it->second.size(), std::vector<double>(g.size()));
            for (std::size_t p = 0; p < it->second.size(); ++p)
                for (std::size_t q = 0; q < g.size(); ++q) table[p][q] = ks_mean(g[q], it->second[p], params.k);
            const auto assign = best_assignment(table, thr);
            for (std::size_t p = 0; p < assign.size(); ++p) ranked.push_back({it->second[p].score, assign[p] >= 0});
        }
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

        std::vector<double> prec, rec;
        long long tp = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            tp += ranked[i].second ? 1 : 0;
            prec.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
            rec.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        }
        const int R = params.recall_points;
        double area = 0.0;
        std::vector<double> curve;
        for (int r = 0; r < R; ++r) {
            const double level = static_cast<double>(r) / (R - 1);
            double p = 0.0;
            for (std::size_t i = 0; i < prec.size(); ++i)
                if (rec[i] >= level) p = std::max(p, prec[i]);
            curve.push_back(p);
            area += p;
        }
        rep.ap_per_threshold.push_back(area / R);
        rep.ar_per_threshold.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        rep.precision_at_recall.push_back(std::move(curve));
    }
    double ap = 0.0, ar = 0.0;
    for (double v : rep.ap_per_threshold) ap += v;
    for (double v : rep.ar_per_threshold) ar += v;
    rep.ap = ap / static_cast<double>(params.thresholds.size());
    rep.ar = ar / static_cast<double>(params.thresholds.size());
    return rep;
}

OracleCase random_oracle_case(Rng& rng, const SkeletonSpec& spec, int max_per_side) {
    OracleCase c;
    const int n_images = 1 + static_cast<int>(rng.below(3));
    long long ann_id = 1;
    for (int im = 0; im < n_images; ++im) {
        const long long image_id = im + 1;
        c.gt.images.push_back({image_id, "img.ppm", 200, 200});
        const int n_gt = (im == 0 ? 1 : 0) +
                         static_cast<int>(rng.below(static_cast<std::uint64_t>(max_per_side + (im == 0 ? 0 : 1))));
        const int n_pred = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_per_side) + 1));
        std::vector<PersonInstance> placed;
        for (int g = 0; g < n_gt; ++g) {
            PersonInstance p;
            p.image_id = image_id;
            p.id = ann_id++;
            const double cx = rng.uniform(40, 160), cy = rng.uniform(40, 160), s = rng.uniform(10, 40);
            for (int k = 0; k < spec.K; ++k) {
                Keypoint kp{cx + rng.uniform(-s, s), cy + rng.uniform(-s, s), 0};
                const double u = rng.uniform();
                kp.v = u < 0.15 ? 0 : (u < 0.3 ? 1 : 2);
                if (kp.v == 0) kp.x = kp.y = 0.0;
                p.keypoints.push_back(kp);
            }
            p.bbox = {cx - s, cy - s, 2 * s, 2 * s};
            p.area = 4 * s * s;
            placed.push_back(p);
            if (p.num_labeled() > 0 || rng.bernoulli(0.5)) c.gt.annotations.push_back(p);
        }
        for (int q = 0; q < n_pred; ++q) {
            PersonInstance p;
            p.image_id = image_id;
            const bool near = !placed.empty() && rng.bernoulli(0.8);
            const PersonInstance* src = near ? &placed[rng.below(placed.size())] : nullptr;
            const double jitter = rng.uniform(0.0, 8.0);
            for (int k = 0; k < spec.K; ++k) {
                Keypoint kp{rng.uniform(0, 200), rng.uniform(0, 200), 2};
                if (src) {
                    const auto& g = src->keypoints[static_cast<std::size_t>(k)];
                    kp.x = g.x + jitter * rng.uniform(-1, 1);
                    kp.y = g.y + jitter * rng.uniform(-1, 1);
                }
                p.keypoints.push_back(kp);
            }
            p.score = std::round(rng.uniform() * 4.0) / 4.0;
            c.preds.push_back(p);
        }
    }
    Category cat;
    cat.keypoints = spec.keypoint_names;
    c.gt.categories.push_back(cat);
    return c;
}

OracleCase ladder_case(const SkeletonSpec& spec) {
    OracleCase c;
    c.gt.images.push_back({1, "img.ppm", 100, 100});
    PersonInstance g;
    g.image_id = 1;
    g.id = 1;
    g.keypoints.assign(static_cast<std::size_t>(spec.K), Keypoint{});
    g.keypoints[0] = {50.0, 50.0, 2};
    g.bbox = {40.0, 40.0, 20.0, 20.0};
    g.area = 400.0;
    c.gt.annotations.push_back(g);
    PersonInstance p = g;
    const double s = std::sqrt(g.area), k = spec.oks_k[0];
    p.keypoints[0].x += s * k * std::sqrt(-2.0 * std::log(0.72));
    p.score = 1.0;
    c.preds.push_back(p);
    c.gt.categories.push_back(Category{});
    return c;
}

SelftestResult oks_selftest(int n_cases, std::uint64_t seed, const SkeletonSpec& spec) {
    SelftestResult res;
    const OksParams params = OksParams::from_skeleton(spec);
    for (int i = 0; i < n_cases; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const OracleCase c = random_oracle_case(rng, spec);
        ++res.cases;
        const bool has_gt = std::any_of(c.gt.annotations.begin(), c.gt.annotations.end(),
                                        [](const auto& a) { return a.num_labeled() > 0; });
        if (!has_gt) continue;
        const EvalReport a = evaluate(c.gt, c.preds, params);
        const EvalReport b = evaluate_bruteforce(c.gt, c.preds, params);
        if (a.ap_per_threshold != b.ap_per_threshold || a.ar_per_threshold != b.ar_per_threshold || a.ap != b.ap ||
            a.ar != b.ar || a.precision_at_recall != b.precision_at_recall) {
            if (res.mismatches++ == 0)
                res.first_failure = "case " + std::to_string(i) + ": AP " + std::to_string(a.ap) + " vs oracle " +
                                    std::to_string(b.ap);
        }
    }
    const OracleCase l = ladder_case(spec);
    const EvalReport r = evaluate(l.gt, l.preds, params);
    res.ladder_ap = r.ap;
    res.ladder_ar = r.ar;
    if (res.first_failure.empty() && !(r.ap == 0.5 && r.ar == 0.5))
        res.first_failure = "threshold ladder case: AP " + std::to_string(r.ap) + ", AR " + std::to_string(r.ar);
    return res;
}

} // namespace poseforge
