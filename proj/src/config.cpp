#include "poseforge/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <set>

#include <json.hpp>

namespace poseforge {

namespace {

using nlohmann::json;

json parse(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, std::string(what) + ": " + e.what(), e.byte);
    }
}

// Reads fields from an object and rejects keys it was never asked about.
class Reader {
public:
    Reader(const json& j, const char* what) : j_(j), what_(what) {
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::InvalidConfig, std::string(what_) + ": bad value for '" + key + "'");
        }
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw Error(ErrorCode::InvalidConfig, std::string(what_) + ": unknown key '" + k + "'");
    }

private:
    const json& j_;
    const char* what_;
    std::set<std::string> seen_;
};

json size_json(Size s) { return json::array({s.w, s.h}); }

void read_size(Reader& r, const char* key, Size& s) {
    std::vector<int> v{s.w, s.h};
    r.get(key, v);
    if (v.size() != 2) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be [w, h]");
    s = {v[0], v[1]};
}

} // namespace

NetConfig net_config_from_json(const std::string& text) {
    const json j = parse(text, "net config");
    Reader r(j, "net config");
    NetConfig c;
    read_size(r, "input_size", c.input_size);
    r.get("latent_stride", c.latent_stride);
    r.get("latent_channels", c.latent_channels);
    r.get("base_channels", c.base_channels);
    r.get("depth", c.depth);
    r.get("channel_mult", c.channel_mult);
    r.get("K", c.K);
    r.get("embed_dim", c.embed_dim);
    r.get("head_channels", c.head_channels);
    std::string tap = to_string(c.tap);
    r.get("tap", tap);
    try {
        c.tap = feature_tap_from_string(tap);
    } catch (const Error&) {
        throw Error(ErrorCode::InvalidConfig, "net config: bad value for 'tap'");
    }
    r.get("pose_bottleneck_channels", c.pose_bottleneck_channels);
    r.get("group_size", c.group_size);
    r.get("timestep", c.timestep);
    r.get("init_gain", c.init_gain);
    r.finish();
    validate_net_config(c);
    return c;
}

std::string net_config_to_json(const NetConfig& c) {
    nlohmann::ordered_json j;
    j["input_size"] = size_json(c.input_size);
    j["latent_stride"] = c.latent_stride;
    j["latent_channels"] = c.latent_channels;
    j["base_channels"] = c.base_channels;
    j["depth"] = c.depth;
    j["channel_mult"] = c.channel_mult;
    j["K"] = c.K;
    j["embed_dim"] = c.embed_dim;
    j["head_channels"] = c.head_channels;
    j["tap"] = to_string(c.tap);
    j["pose_bottleneck_channels"] = c.pose_bottleneck_channels;
    j["group_size"] = c.group_size;
    j["timestep"] = c.timestep;
    j["init_gain"] = c.init_gain;
    return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
    const json j = parse(text, "train config");
    Reader r(j, "train config");
    TrainConfig c;
    r.get("lr", c.lr);
    r.get("steps", c.steps);
    r.get("batch_size", c.batch_size);
    r.get("seed", c.seed);
    std::vector<double> w{c.w_rgb, c.w_pose};
    r.get("loss_weights", w);
    if (w.size() != 2) throw Error(ErrorCode::InvalidConfig, "loss_weights must be [w_rgb, w_pose]");
    c.w_rgb = w[0];
    c.w_pose = w[1];
    std::string opt = c.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    r.get("optimizer", opt);
    if (opt == "adam")
        c.optimizer = OptimizerKind::Adam;
    else if (opt == "sgd")
        c.optimizer = OptimizerKind::Sgd;
    else
        throw Error(ErrorCode::InvalidConfig, "optimizer must be 'adam' or 'sgd'");
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("eps", c.eps);
    r.get("weight_decay", c.weight_decay);
    r.get("recon_enabled", c.recon_enabled);
    r.get("augment", c.augment);
    json reference_scale;
    r.get("reference_scale", reference_scale); // documentation only
    r.finish();
    validate_train_config(c);
    return c;
}

std::string train_config_to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["lr"] = c.lr;
    j["steps"] = c.steps;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    j["loss_weights"] = {c.w_rgb, c.w_pose};
    j["optimizer"] = c.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["weight_decay"] = c.weight_decay;
    j["recon_enabled"] = c.recon_enabled;
    j["augment"] = c.augment;
    const ReferenceScale p;
    j["reference_scale"] = {{"lr", p.lr}, {"optimizer", p.optimizer}, {"input_size", {p.input_w, p.input_h}},
                        {"gpus", p.gpus}};
    return j.dump(2);
}

AugConfig aug_config_from_json(const std::string& text) {
    const json j = parse(text, "aug config");
    Reader r(j, "aug config");
    AugConfig c;
    r.get("flip_prob", c.flip_prob);
    r.get("half_body_prob", c.half_body_prob);
    r.get("half_body_min_kpts", c.half_body_min_kpts);
    r.get("half_body_padding", c.half_body_padding);
    r.get("scale_jitter", c.scale_jitter);
    r.get("rotation_prob", c.rotation_prob);
    r.get("rotation_jitter", c.rotation_jitter);
    r.get("blur_prob", c.blur_prob);
    r.get("blur_sigma", c.blur_sigma);
    r.get("median_blur_prob", c.median_blur_prob);
    r.get("median_kernels", c.median_kernels);
    r.get("dropout_prob", c.dropout_prob);
    r.get("dropout_hole_frac", c.dropout_hole_frac);
    r.finish();
    validate_aug_config(c);
    return c;
}

std::string aug_config_to_json(const AugConfig& c) {
    nlohmann::ordered_json j;
    j["flip_prob"] = c.flip_prob;
    j["half_body_prob"] = c.half_body_prob;
    j["half_body_min_kpts"] = c.half_body_min_kpts;
    j["half_body_padding"] = c.half_body_padding;
    j["scale_jitter"] = c.scale_jitter;
    j["rotation_prob"] = c.rotation_prob;
    j["rotation_jitter"] = c.rotation_jitter;
    j["blur_prob"] = c.blur_prob;
    j["blur_sigma"] = c.blur_sigma;
    j["median_blur_prob"] = c.median_blur_prob;
    j["median_kernels"] = c.median_kernels;
    j["dropout_prob"] = c.dropout_prob;
    j["dropout_hole_frac"] = c.dropout_hole_frac;
    return j.dump(2);
}

HeatmapConfig heatmap_config_from_json(const std::string& text) {
    const json j = parse(text, "heatmap config");
    Reader r(j, "heatmap config");
    HeatmapConfig c;
    read_size(r, "input_size", c.input_size);
    read_size(r, "heatmap_size", c.heatmap_size);
    r.get("sigma", c.sigma);
    r.get("supervise_occluded", c.supervise_occluded);
    r.finish();
    validate_heatmap_config(c);
    return c;
}

std::string heatmap_config_to_json(const HeatmapConfig& c) {
    nlohmann::ordered_json j;
    j["input_size"] = size_json(c.input_size);
    j["heatmap_size"] = size_json(c.heatmap_size);
    j["sigma"] = c.sigma;
    j["supervise_occluded"] = c.supervise_occluded;
    return j.dump(2);
}

OksParams oks_params_from_json(const std::string& text, const SkeletonSpec& spec) {
    const json j = parse(text, "oks config");
    Reader r(j, "oks config");
    OksParams p = OksParams::from_skeleton(spec);
    r.get("k", p.k);
    r.get("thresholds", p.thresholds);
    r.get("max_dets", p.max_dets);
    r.get("recall_points", p.recall_points);
    r.finish();
    validate_oks_params(p);
    if (static_cast<int>(p.k.size()) != spec.K)
        throw Error(ErrorCode::InvalidConfig, "oks config: k has a different length than the skeleton");
    return p;
}

std::string oks_params_to_json(const OksParams& p) {
    nlohmann::ordered_json j;
    j["k"] = p.k;
    j["thresholds"] = p.thresholds;
    j["max_dets"] = p.max_dets;
    j["recall_points"] = p.recall_points;
    return j.dump(2);
}

StyleParams style_params_from_json(const std::string& text) {
    const json j = parse(text, "style config");
    if (j.is_string()) {
        if (j.get<std::string>() == "monet-like") return StyleParams::monet_like();
        if (j.get<std::string>() == "neutral") return StyleParams::neutral();
        throw Error(ErrorCode::InvalidConfig, "unknown style preset");
    }
    Reader r(j, "style config");
    StyleParams s;
    r.get("hue_degrees", s.hue_degrees);
    r.get("saturation", s.saturation);
    r.get("blur_sigma", s.blur_sigma);
    r.get("noise_amplitude", s.noise_amplitude);
    r.get("seed", s.seed);
    r.finish();
    if (!(s.noise_amplitude >= 0.0 && s.noise_amplitude < 1.0))
        throw Error(ErrorCode::InvalidConfig, "noise_amplitude must lie in [0, 1)");
    if (!(s.saturation >= 0.0) || !(s.blur_sigma >= 0.0))
        throw Error(ErrorCode::InvalidConfig, "saturation and blur_sigma must be >= 0");
    return s;
}

AugConfig micro_scale_aug_config() {
    AugConfig a;
    a.scale_jitter = {0.8, 1.2};
    a.rotation_prob = 0.4;
    a.rotation_jitter = {-25.0, 25.0};
    a.half_body_prob = 0.15;
    a.dropout_prob = 0.2;
    return a;
}

GlobalConfig default_global_config() {
    GlobalConfig g;
    g.net.input_size = {96, 128};
    g.aug = micro_scale_aug_config();
    g.heatmap = make_heatmap_config(g.net.input_size);
    return g;
}

GlobalConfig load_global_config(const std::string& path) {
    namespace fs = std::filesystem;
    if (!fs::exists(path)) throw Error(ErrorCode::IoFailure, "config file not found: " + path);
    const json j = parse(read_file(path), path.c_str());
    Reader r(j, "config");
    const fs::path base = fs::path(path).parent_path();
    auto file_of = [&](const char* key) -> std::optional<std::string> {
        std::string rel;
        r.get(key, rel);
        if (rel.empty()) return std::nullopt;
        const std::string p = fs::path(rel).is_absolute() ? rel : (base / rel).string();
        if (!fs::exists(p)) throw Error(ErrorCode::IoFailure, std::string("config file not found: ") + p);
        return read_file(p);
    };

    GlobalConfig g = default_global_config();
    if (auto t = file_of("skeleton")) {
        g.skeleton = skeleton_from_json(*t);
        g.oks = OksParams::from_skeleton(g.skeleton);
    }
    if (auto t = file_of("net")) g.net = net_config_from_json(*t);
    g.heatmap = make_heatmap_config(g.net.input_size);
    if (auto t = file_of("train")) g.train = train_config_from_json(*t);
    if (auto t = file_of("aug")) g.aug = aug_config_from_json(*t);
    if (auto t = file_of("heatmap")) g.heatmap = heatmap_config_from_json(*t);
    if (auto t = file_of("oks")) g.oks = oks_params_from_json(*t, g.skeleton);
    if (auto t = file_of("style")) g.style = style_params_from_json(*t);
    r.get("seed", g.seed);
    std::string out = g.output_dir;
    r.get("output_dir", out);
    g.output_dir = fs::path(out).is_absolute() ? out : (base / out).string();
    r.finish();
    if (g.net.K != g.skeleton.K) throw Error(ErrorCode::InvalidConfig, "net K differs from the skeleton's K");
    if (g.heatmap.input_size != g.net.input_size)
        throw Error(ErrorCode::InvalidConfig, "heatmap input_size differs from the network input");
    return g;
}

std::uint64_t apply_seed_env(std::uint64_t seed) {
    const char* env = std::getenv("POSEFORGE_SEED");
    if (!env || !*env) return seed;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || env[0] == '-')
        throw Error(ErrorCode::InvalidConfig, std::string("POSEFORGE_SEED is not an unsigned integer: ") + env);
    return v;
}

} // namespace poseforge
