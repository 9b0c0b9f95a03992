#include "poseforge/oks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace poseforge {

std::vector<double> OksParams::default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
    return t;
}

OksParams OksParams::from_skeleton(const SkeletonSpec& spec) {
    OksParams p;
    p.k = spec.oks_k;
    return p;
}

void validate_oks_params(const OksParams& params) {
    if (params.k.empty()) throw Error(ErrorCode::InvalidConfig, "OKS constants are empty");
    for (double k : params.k)
        if (!(k > 0.0)) throw Error(ErrorCode::InvalidConfig, "OKS constants must be positive");
    if (params.thresholds.empty()) throw Error(ErrorCode::InvalidConfig, "no OKS thresholds");
    for (std::size_t i = 0; i < params.thresholds.size(); ++i) {
        const double t = params.thresholds[i];
        if (!(t > 0.0 && t <= 1.0)) throw Error(ErrorCode::InvalidConfig, "thresholds must lie in (0, 1]");
        if (i > 0 && !(t > params.thresholds[i - 1]))
            throw Error(ErrorCode::InvalidConfig, "thresholds must be strictly increasing");
    }
    if (params.max_dets < 1) throw Error(ErrorCode::InvalidConfig, "max_dets must be positive");
    if (params.recall_points < 2) throw Error(ErrorCode::InvalidConfig, "recall_points must be >= 2");
}

double oks(const PersonInstance& gt, const PersonInstance& pred, const OksParams& params) {
    if (gt.keypoints.size() != pred.keypoints.size() || gt.keypoints.size() != params.k.size())
        throw Error(ErrorCode::KeypointCountMismatch, "OKS operands disagree on K");
    const double s2 = gt.area; // s^2
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < gt.keypoints.size(); ++i) {
        if (gt.keypoints[i].v <= 0) continue;
        const double dx = pred.keypoints[i].x - gt.keypoints[i].x;
        const double dy = pred.keypoints[i].y - gt.keypoints[i].y;
        const double k = params.k[i];
        sum += std::exp(-(dx * dx + dy * dy) / (2.0 * s2 * k * k));
        ++n;
    }
    if (n == 0) throw Error(ErrorCode::NoVisibleKeypoints, "ground truth has no labeled keypoints");
    return sum / n;
}

namespace {

std::vector<int> score_order(const std::vector<PersonInstance>& preds) {
    std::vector<int> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return preds[a].score > preds[b].score; });
    return order;
}

} // namespace

std::vector<Match> match_image(const std::vector<PersonInstance>& gts, const std::vector<PersonInstance>& preds,
                               double threshold, const OksParams& params) {
    std::vector<bool> claimed(gts.size(), false);
    std::vector<Match> out;
    out.reserve(preds.size());
    for (int p : score_order(preds)) {
        Match m{p, -1, 0.0};
        double best = -1.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (claimed[g] || gts[g].num_labeled() == 0) continue;
            const double o = oks(gts[g], preds[static_cast<std::size_t>(p)], params);
            if (o >= threshold && o > best) {
                best = o;
                m.gt = static_cast<int>(g);
                m.oks = o;
            }
        }
        if (m.gt >= 0) claimed[static_cast<std::size_t>(m.gt)] = true;
        out.push_back(m);
    }
    return out;
}

double EvalReport::ap_at(double t) const {
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        if (std::fabs(thresholds[i] - t) < 1e-9) return ap_per_threshold[i];
    return -1.0;
}

double EvalReport::ar_at(double t) const {
    for (std::size_t i = 0; i < thresholds.size(); ++i)
        if (std::fabs(thresholds[i] - t) < 1e-9) return ar_per_threshold[i];
    return -1.0;
}

EvalReport evaluate(const AnnotationFile& gt_file, const ResultFile& result_file, const OksParams& params) {
    const int K = static_cast<int>(params.k.size());
    std::vector<PersonInstance> preds;
    preds.reserve(result_file.results.size());
    for (const auto& r : result_file.results) preds.push_back(result_to_instance(r, K));
    return evaluate(gt_file, preds, params);
}

EvalReport evaluate(const AnnotationFile& gt_file, const std::vector<PersonInstance>& preds, const OksParams& params) {
    validate_oks_params(params);

    std::map<long long, std::vector<PersonInstance>> gts_by_image, preds_by_image;
    for (const auto& im : gt_file.images) gts_by_image[im.id];
    long long num_gt = 0;
    for (const auto& a : gt_file.annotations) {
        gts_by_image[a.image_id].push_back(a);
        if (a.num_labeled() > 0) ++num_gt;
    }
    if (num_gt == 0) throw Error(ErrorCode::EmptyGroundTruth, "no ground truth with labeled keypoints");
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!gts_by_image.count(preds[i].image_id))
            throw Error(ErrorCode::ImageIdMismatch,
                        "result " + std::to_string(i) + " refers to unknown image " + std::to_string(preds[i].image_id),
                        i);
        preds_by_image[preds[i].image_id].push_back(preds[i]);
    }

    // Per-image cap on detections, highest scores first.
    for (auto& [id, list] : preds_by_image) {
        const auto order = score_order(list);
        std::vector<PersonInstance> kept;
        for (std::size_t i = 0; i < order.size() && i < static_cast<std::size_t>(params.max_dets); ++i)
            kept.push_back(list[static_cast<std::size_t>(order[i])]);
        list = std::move(kept);
    }

    EvalReport report;
    report.thresholds = params.thresholds;
    report.num_gt = num_gt;
    const int R = params.recall_points;

    for (std::size_t ti = 0; ti < params.thresholds.size(); ++ti) {
        const double thr = params.thresholds[ti];
        struct Det {
            double score;
            bool tp;
        };
        std::vector<Det> dets;
        for (const auto& [id, gts] : gts_by_image) {
            auto it = preds_by_image.find(id);
            if (it == preds_by_image.end()) continue;
            const auto matches = match_image(gts, it->second, thr, params);
            for (const auto& m : matches) dets.push_back({it->second[static_cast<std::size_t>(m.pred)].score, m.gt >= 0});
            if (ti == 0) report.per_image_matches.push_back({id, matches});
        }
        std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });

        std::vector<double> precision(dets.size()), recall(dets.size());
        long long tp = 0, fp = 0;
        for (std::size_t i = 0; i < dets.size(); ++i) {
            (dets[i].tp ? tp : fp) += 1;
            precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
            recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
        }
        // Interpolated precision: running max from the right.
        for (std::size_t i = dets.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

        std::vector<double> curve(static_cast<std::size_t>(R), 0.0);
        std::size_t j = 0;
        double area = 0.0;
        for (int r = 0; r < R; ++r) {
            const double level = static_cast<double>(r) / (R - 1);
            while (j < recall.size() && recall[j] < level) ++j;
            curve[static_cast<std::size_t>(r)] = j < recall.size() ? precision[j] : 0.0;
            area += curve[static_cast<std::size_t>(r)];
        }
        report.ap_per_threshold.push_back(area / R);
        report.ar_per_threshold.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
        report.precision_at_recall.push_back(std::move(curve));
        if (ti == 0) report.num_pred = static_cast<long long>(dets.size());
    }

    const double n = static_cast<double>(params.thresholds.size());
    report.ap = std::accumulate(report.ap_per_threshold.begin(), report.ap_per_threshold.end(), 0.0) / n;
    report.ar = std::accumulate(report.ar_per_threshold.begin(), report.ar_per_threshold.end(), 0.0) / n;
    return report;
}

std::string report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["ap"] = report.ap;
    j["ar"] = report.ar;
    j["thresholds"] = report.thresholds;
    j["ap_per_threshold"] = report.ap_per_threshold;
    j["ar_per_threshold"] = report.ar_per_threshold;
    j["num_gt"] = report.num_gt;
    j["num_pred"] = report.num_pred;
    nlohmann::json images = nlohmann::json::array();
    for (const auto& im : report.per_image_matches) {
        nlohmann::json ms = nlohmann::json::array();
        for (const auto& m : im.matches) ms.push_back({{"pred", m.pred}, {"gt", m.gt}, {"oks", m.oks}});
        images.push_back({{"image_id", im.image_id}, {"matches", ms}});
    }
    j["per_image_matches"] = std::move(images);
    return j.dump(2) + "\n";
}

std::string report_to_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
    std::size_t name_w = 5;
    for (const auto& [name, r] : rows) name_w = std::max(name_w, name.size());
    std::ostringstream os;
    auto cell = [](double v) {
        char buf[16];
        if (v < 0.0)
            std::snprintf(buf, sizeof buf, "%7s", "N/A");
        else
            std::snprintf(buf, sizeof buf, "%7.1f", 100.0 * v);
        return std::string(buf);
    };
    os << std::string("Model") + std::string(name_w - 5, ' ') << "     AP   AP50   AP75     AR   AR50\n";
    for (const auto& [name, r] : rows) {
        os << name << std::string(name_w - name.size(), ' ') << cell(r.ap) << cell(r.ap_at(0.5)) << cell(r.ap_at(0.75))
           << cell(r.ar) << cell(r.ar_at(0.5)) << "\n";
    }
    return os.str();
}

std::string report_to_svg(const EvalReport& report) {
    const int W = 420, H = 320, pad = 40;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\"" << H - pad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 8 << "\" font-size=\"12\" text-anchor=\"middle\">recall</text>\n";
    os << "<text x=\"12\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << H / 2
       << ")\" text-anchor=\"middle\">precision</text>\n";
    for (std::size_t t = 0; t < report.precision_at_recall.size(); ++t) {
        const auto& curve = report.precision_at_recall[t];
        const int shade = static_cast<int>(200.0 * t / std::max<std::size_t>(1, report.precision_at_recall.size()));
        os << "<polyline fill=\"none\" stroke=\"rgb(" << shade << "," << shade << ",255)\" points=\"";
        for (std::size_t r = 0; r < curve.size(); ++r) {
            char buf[48];
            const double x = pad + (W - 2.0 * pad) * r / (curve.size() - 1);
            const double y = (H - pad) - (H - 2.0 * pad) * curve[r];
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x, y);
            os << buf;
        }
        char label[32];
        std::snprintf(label, sizeof label, "OKS %.2f", report.thresholds[t]);
        os << "\"><title>" << label << "</title></polyline>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace poseforge
