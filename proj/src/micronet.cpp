#include "poseforge/micronet.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "poseforge/rng.hpp"

namespace poseforge {

using nn::Parameter;
using nn::Tape;
using nn::Tensor;
using nn::Var;

const char* to_string(FeatureTap tap) { return tap == FeatureTap::Last ? "last" : "second_to_last"; }

FeatureTap feature_tap_from_string(const std::string& s) {
    if (s == "last") return FeatureTap::Last;
    if (s == "second_to_last" || s == "second-to-last") return FeatureTap::SecondToLast;
    throw Error(ErrorCode::InvalidConfig, "unknown feature tap '" + s + "'");
}

void validate_net_config(const NetConfig& cfg) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (cfg.latent_stride != 8) fail("latent_stride must be 8");
    if (cfg.input_size.w <= 0 || cfg.input_size.h <= 0 || cfg.input_size.w % 8 != 0 || cfg.input_size.h % 8 != 0)
        fail("input size must be positive and divisible by 8");
    if (cfg.depth < 2) fail("depth must be >= 2");
    if (static_cast<int>(cfg.channel_mult.size()) != cfg.depth) fail("channel_mult needs one entry per stage");
    if (cfg.base_channels <= 0) fail("base_channels must be positive");
    if (cfg.head_channels <= 0) fail("head_channels must be positive");
    if (cfg.latent_channels <= 0) fail("latent_channels must be positive");
    for (int m : cfg.channel_mult)
        if (m <= 0) fail("channel_mult entries must be positive");
    if (cfg.K <= 0) fail("K must be positive");
    if (cfg.embed_dim <= 0) fail("embed_dim must be positive");
    if (cfg.pose_bottleneck_channels < 0) fail("pose_bottleneck_channels must be >= 0");
    if (cfg.group_size <= 0) fail("group_size must be positive");
    if (!(cfg.init_gain > 0.0) || !std::isfinite(cfg.init_gain)) fail("init_gain must be positive");
}

bool TaskEmbedding::is_valid() const {
    return (label[0] == 1.0 && label[1] == 0.0) || (label[0] == 0.0 && label[1] == 1.0);
}

double DiffusionSchedule::alpha(int t) const {
    if (t < 1 || t > T())
        throw Error(ErrorCode::TimestepOutOfRange, "t = " + std::to_string(t) + " outside [1, " + std::to_string(T()) + "]");
    return alphas_cumprod[static_cast<std::size_t>(t - 1)];
}

DiffusionSchedule make_schedule(int T, double beta_lo, double beta_hi) {
    if (T < 1) throw Error(ErrorCode::InvalidRange, "T must be >= 1");
    if (!(beta_lo > 0.0 && beta_lo <= beta_hi && beta_hi < 1.0))
        throw Error(ErrorCode::InvalidRange, "need 0 < beta_lo <= beta_hi < 1");
    DiffusionSchedule s;
    s.fixed_t = T;
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double beta = T == 1 ? beta_lo : beta_lo + (beta_hi - beta_lo) * i / (T - 1);
        prod *= 1.0 - beta;
        s.betas.push_back(beta);
        s.alphas_cumprod.push_back(prod);
    }
    return s;
}

std::vector<double> eps_to_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat, double alpha_t) {
    if (z_t.size() != eps_hat.size()) throw Error(ErrorCode::ShapeMismatch, "z_t and eps_hat differ in size");
    if (!(alpha_t > 0.0 && alpha_t <= 1.0)) throw Error(ErrorCode::InvalidRange, "alpha must lie in (0, 1]");
    const double a = std::sqrt(alpha_t), b = std::sqrt(1.0 - alpha_t);
    std::vector<double> x0(z_t.size());
    for (std::size_t i = 0; i < z_t.size(); ++i) x0[i] = (z_t[i] - b * eps_hat[i]) / a;
    return x0;
}

std::vector<double> eps_to_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                              const DiffusionSchedule& sched, int t) {
    return eps_to_x0(z_t, eps_hat, sched.alpha(t));
}

std::vector<double> add_noise(const std::vector<double>& x0, const std::vector<double>& eps, double alpha_t) {
    if (x0.size() != eps.size()) throw Error(ErrorCode::ShapeMismatch, "x0 and eps differ in size");
    const double a = std::sqrt(alpha_t), b = std::sqrt(1.0 - alpha_t);
    std::vector<double> z(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) z[i] = a * x0[i] + b * eps[i];
    return z;
}

namespace {

constexpr int kTimeFreqs = 4;
constexpr int kCondDim = 2 + 2 * kTimeFreqs;

Tensor conditioning(Task task, int timestep) {
    const auto label = TaskEmbedding::of(task).label;
    Tensor c = Tensor::chw(kCondDim, 1, 1);
    c.data[0] = label[0];
    c.data[1] = label[1];
    for (int i = 0; i < kTimeFreqs; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / kTimeFreqs);
        c.data[2 + 2 * i] = std::sin(timestep * freq);
        c.data[3 + 2 * i] = std::cos(timestep * freq);
    }
    return c;
}

} // namespace

std::size_t MicroUNet::add_param(const std::string& name, std::vector<int> shape, bool trainable) {
    params_.emplace_back(name, std::move(shape), trainable);
    return params_.size() - 1;
}

MicroUNet::ResBlock MicroUNet::make_block(const std::string& name, int cin, int cout) {
    ResBlock b;
    b.gn1_g = add_param(name + ".norm1.gamma", {cin});
    b.gn1_b = add_param(name + ".norm1.beta", {cin});
    b.conv1_w = add_param(name + ".conv1.weight", {cout, cin, 3, 3});
    b.conv1_b = add_param(name + ".conv1.bias", {cout});
    b.emb_w = add_param(name + ".emb_proj.weight", {cout, cfg_.embed_dim});
    b.emb_b = add_param(name + ".emb_proj.bias", {cout});
    b.gn2_g = add_param(name + ".norm2.gamma", {cout});
    b.gn2_b = add_param(name + ".norm2.beta", {cout});
    b.conv2_w = add_param(name + ".conv2.weight", {cout, cout, 3, 3});
    b.conv2_b = add_param(name + ".conv2.bias", {cout});
    if (cin != cout) {
        b.has_skip = true;
        b.skip_w = add_param(name + ".skip.weight", {cout, cin, 1, 1});
        b.skip_b = add_param(name + ".skip.bias", {cout});
    }
    return b;
}

MicroUNet::MicroUNet(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
    validate_net_config(cfg_);
    const int D = cfg_.depth;
    const int patch = cfg_.latent_stride;

    enc_w_ = add_param("encoder.patch.weight", {cfg_.latent_channels, 3, patch, patch}, false);
    enc_b_ = add_param("encoder.patch.bias", {cfg_.latent_channels}, false);

    cond_w_ = add_param("cond.proj.weight", {cfg_.embed_dim, kCondDim});
    cond_b_ = add_param("cond.proj.bias", {cfg_.embed_dim});

    stem_w_ = add_param("unet.stem.weight", {channels(0), cfg_.latent_channels, 3, 3});
    stem_b_ = add_param("unet.stem.bias", {channels(0)});
    int prev = channels(0);
    for (int i = 0; i < D; ++i) {
        const std::string n = "unet.down" + std::to_string(i);
        down_blocks_.push_back(make_block(n + ".block", prev, channels(i)));
        prev = channels(i);
        if (i < D - 1) {
            down_w_.push_back(add_param(n + ".downsample.weight", {prev, prev, 3, 3}));
            down_b_.push_back(add_param(n + ".downsample.bias", {prev}));
        }
    }
    mid_ = make_block("unet.mid", prev, prev);
    for (int j = 0; j < D; ++j) {
        const int level = D - 1 - j;
        up_blocks_.push_back(make_block("unet.up" + std::to_string(j) + ".block", prev + channels(level), channels(level)));
        prev = channels(level);
    }

    recon_w_ = add_param("recon_head.conv.weight", {cfg_.latent_channels, channels(0), 3, 3});
    recon_b_ = add_param("recon_head.conv.bias", {cfg_.latent_channels});

    const int tap_channels = cfg_.tap == FeatureTap::Last ? channels(0) : channels(1);
    const int hc = cfg_.head_channels;
    const int pose_out = cfg_.pose_bottleneck_channels > 0 ? cfg_.pose_bottleneck_channels : cfg_.K;
    deconv_w_ = add_param("pose_head.deconv.weight", {tap_channels, hc, 4, 4});
    deconv_b_ = add_param("pose_head.deconv.bias", {hc});
    head_gn_g_ = add_param("pose_head.norm.gamma", {hc});
    head_gn_b_ = add_param("pose_head.norm.beta", {hc});
    head1_w_ = add_param("pose_head.conv1.weight", {hc, hc, 1, 1});
    head1_b_ = add_param("pose_head.conv1.bias", {hc});
    head2_w_ = add_param("pose_head.conv2.weight", {pose_out, hc, 1, 1});
    head2_b_ = add_param("pose_head.conv2.bias", {pose_out});
    if (cfg_.pose_bottleneck_channels > 0) {
        has_expand_ = true;
        expand_ = add_param("pose_head.fixed_expand", {cfg_.K, cfg_.pose_bottleneck_channels}, false);
    }
    init_parameters();
}

void MicroUNet::init_parameters() {
    Rng rng(seed_);
    for (auto& p : params_) {
        const auto& n = p.name;
        const bool is_gamma = n.ends_with(".gamma");
        const bool is_beta = n.ends_with(".beta");
        const bool is_bias = n.ends_with(".bias");
        if (is_gamma) {
            std::fill(p.value.data.begin(), p.value.data.end(), 1.0);
        } else if (is_beta || (is_bias && n != "encoder.patch.bias")) {
            std::fill(p.value.data.begin(), p.value.data.end(), 0.0);
        } else {
            int fan_in = 1;
            if (n == "encoder.patch.bias") {
                fan_in = 3 * cfg_.latent_stride * cfg_.latent_stride;
            } else if (n == "pose_head.deconv.weight") {
                fan_in = p.value.shape[0] * 4; // each output sees 2x2 taps per input channel
            } else if (n == "pose_head.fixed_expand") {
                fan_in = p.value.shape[1];
            } else {
                for (std::size_t d = 1; d < p.value.shape.size(); ++d) fan_in *= p.value.shape[d];
            }
            const double gain = n.starts_with("encoder.") ? 1.0 : cfg_.init_gain;
            const double bound = gain / std::sqrt(static_cast<double>(fan_in));
            for (auto& v : p.value.data) v = rng.uniform(-bound, bound);
        }
    }
}

std::vector<Parameter*> MicroUNet::parameters_with_prefix(const std::string& prefix) {
    std::vector<Parameter*> out;
    for (auto& p : params_)
        if (p.name.starts_with(prefix)) out.push_back(&p);
    return out;
}

void MicroUNet::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

Tensor MicroUNet::image_to_tensor(const Image& img) {
    Tensor t = Tensor::chw(3, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) t.at(c, y, x) = 2.0 * img.at(x, y, c) - 1.0;
    return t;
}

Tensor MicroUNet::encode_latent(const Image& img) const {
    if (img.width != cfg_.input_size.w || img.height != cfg_.input_size.h)
        throw Error(ErrorCode::SizeMismatch, "image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                                                 ", network expects " + std::to_string(cfg_.input_size.w) + "x" +
                                                 std::to_string(cfg_.input_size.h));
    return nn::conv2d_forward(image_to_tensor(img), params_[enc_w_].value, params_[enc_b_].value, cfg_.latent_stride, 0);
}

Var MicroUNet::run_block(Tape& t, const ResBlock& b, Var x, Var emb) {
    Var h = nn::group_norm(t, x, params_[b.gn1_g], params_[b.gn1_b], group_for(t.value(x).channels()));
    h = nn::silu(t, h);
    h = nn::conv2d(t, h, params_[b.conv1_w], params_[b.conv1_b], 1, 1);
    h = nn::add_channel_bias(t, h, nn::linear(t, emb, params_[b.emb_w], params_[b.emb_b]));
    h = nn::group_norm(t, h, params_[b.gn2_g], params_[b.gn2_b], group_for(t.value(h).channels()));
    h = nn::silu(t, h);
    h = nn::conv2d(t, h, params_[b.conv2_w], params_[b.conv2_b], 1, 1);
    Var skip = b.has_skip ? nn::conv2d(t, x, params_[b.skip_w], params_[b.skip_b], 1, 0) : x;
    return nn::add(t, h, skip);
}

MicroUNet::Output MicroUNet::forward(Tape& t, Var latent, Task task) {
    const Tensor& z = t.value(latent);
    const int lh = cfg_.input_size.h / cfg_.latent_stride, lw = cfg_.input_size.w / cfg_.latent_stride;
    if (z.shape != std::vector<int>{cfg_.latent_channels, lh, lw})
        throw Error(ErrorCode::ShapeMismatch, "latent shape does not match the network config");
    const int D = cfg_.depth;

    Var cond = t.constant(conditioning(task, cfg_.timestep));
    Var emb = nn::silu(t, nn::linear(t, cond, params_[cond_w_], params_[cond_b_]));

    Var h = nn::conv2d(t, latent, params_[stem_w_], params_[stem_b_], 1, 1);
    std::vector<Var> skips;
    for (int i = 0; i < D; ++i) {
        h = run_block(t, down_blocks_[static_cast<std::size_t>(i)], h, emb);
        skips.push_back(h);
        if (i < D - 1) h = nn::conv2d(t, h, params_[down_w_[static_cast<std::size_t>(i)]], params_[down_b_[static_cast<std::size_t>(i)]], 2, 1);
    }
    h = run_block(t, mid_, h, emb);

    Var second_to_last{}, last{};
    for (int j = 0; j < D; ++j) {
        const int level = D - 1 - j;
        h = nn::concat_channels(t, h, skips[static_cast<std::size_t>(level)]);
        h = run_block(t, up_blocks_[static_cast<std::size_t>(j)], h, emb);
        if (j < D - 1) {
            const Tensor& next = t.value(skips[static_cast<std::size_t>(level - 1)]);
            h = nn::upsample2x(t, h, next.height(), next.width());
        }
        if (j == D - 2) second_to_last = h;
        if (j == D - 1) last = h;
    }

    if (task == Task::Rgb) {
        Var out = nn::conv2d(t, nn::silu(t, last), params_[recon_w_], params_[recon_b_], 1, 1);
        return {out, last};
    }
    Var tapped = cfg_.tap == FeatureTap::Last ? last : second_to_last;
    Var p = nn::conv_transpose2d(t, nn::silu(t, tapped), params_[deconv_w_], params_[deconv_b_], 2, 1);
    p = nn::silu(t, nn::group_norm(t, p, params_[head_gn_g_], params_[head_gn_b_], group_for(cfg_.head_channels)));
    p = nn::silu(t, nn::conv2d(t, p, params_[head1_w_], params_[head1_b_], 1, 0));
    p = nn::conv2d(t, p, params_[head2_w_], params_[head2_b_], 1, 0);
    if (has_expand_) p = nn::fixed_channel_map(t, p, params_[expand_]);
    return {p, tapped};
}

Tensor MicroUNet::predict(const Image& img, Task task) {
    Tape tape;
    Var z = tape.constant(encode_latent(img));
    return tape.value(forward(tape, z, task).out);
}

bool MicroUNet::operator==(const MicroUNet& o) const {
    if (!(cfg_ == o.cfg_) || params_.size() != o.params_.size()) return false;
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].value.data != o.params_[i].value.data) return false;
    return true;
}

namespace {

constexpr char kMagic[8] = {'P', 'F', 'M', 'U', 'N', 'E', 'T', '1'};

template <typename T>
void put(std::string& s, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    s.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& s, std::size_t& pos) {
    if (pos + sizeof(T) > s.size()) throw Error(ErrorCode::IoFailure, "truncated checkpoint");
    T v;
    std::memcpy(&v, s.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

} // namespace

std::string MicroUNet::save_checkpoint(std::uint64_t step) const {
    static_assert(std::endian::native == std::endian::little);
    std::string out(kMagic, sizeof kMagic);
    for (int v : {cfg_.input_size.w, cfg_.input_size.h, cfg_.latent_stride, cfg_.latent_channels, cfg_.base_channels,
                  cfg_.depth, cfg_.K, cfg_.embed_dim, cfg_.head_channels, static_cast<int>(cfg_.tap),
                  cfg_.pose_bottleneck_channels, cfg_.group_size, cfg_.timestep})
        put<std::int32_t>(out, v);
    for (int m : cfg_.channel_mult) put<std::int32_t>(out, m);
    put<double>(out, cfg_.init_gain);
    put<std::uint64_t>(out, seed_);
    put<std::uint64_t>(out, step);
    put<std::int32_t>(out, static_cast<std::int32_t>(params_.size()));
    for (const auto& p : params_) {
        put<std::int32_t>(out, static_cast<std::int32_t>(p.value.size()));
        for (double v : p.value.data) put<float>(out, static_cast<float>(v));
    }
    return out;
}

MicroUNet MicroUNet::load_checkpoint(const std::string& bytes, std::uint64_t* step) {
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw Error(ErrorCode::IoFailure, "not a checkpoint file");
    std::size_t pos = sizeof kMagic;
    NetConfig cfg;
    cfg.input_size.w = get<std::int32_t>(bytes, pos);
    cfg.input_size.h = get<std::int32_t>(bytes, pos);
    cfg.latent_stride = get<std::int32_t>(bytes, pos);
    cfg.latent_channels = get<std::int32_t>(bytes, pos);
    cfg.base_channels = get<std::int32_t>(bytes, pos);
    cfg.depth = get<std::int32_t>(bytes, pos);
    cfg.K = get<std::int32_t>(bytes, pos);
    cfg.embed_dim = get<std::int32_t>(bytes, pos);
    cfg.head_channels = get<std::int32_t>(bytes, pos);
    cfg.tap = static_cast<FeatureTap>(get<std::int32_t>(bytes, pos));
    cfg.pose_bottleneck_channels = get<std::int32_t>(bytes, pos);
    cfg.group_size = get<std::int32_t>(bytes, pos);
    cfg.timestep = get<std::int32_t>(bytes, pos);
    if (cfg.depth < 2 || cfg.depth > 16) throw Error(ErrorCode::IoFailure, "checkpoint depth out of range");
    cfg.channel_mult.clear();
    for (int i = 0; i < cfg.depth; ++i) cfg.channel_mult.push_back(get<std::int32_t>(bytes, pos));
    cfg.init_gain = get<double>(bytes, pos);
    const auto seed = get<std::uint64_t>(bytes, pos);
    const auto s = get<std::uint64_t>(bytes, pos);
    if (step) *step = s;

    MicroUNet net(cfg, seed);
    const int count = get<std::int32_t>(bytes, pos);
    if (count != static_cast<int>(net.params_.size())) throw Error(ErrorCode::IoFailure, "checkpoint parameter count");
    for (auto& p : net.params_) {
        const int n = get<std::int32_t>(bytes, pos);
        if (n != static_cast<int>(p.value.size())) throw Error(ErrorCode::IoFailure, "checkpoint block size for " + p.name);
        for (auto& v : p.value.data) v = get<float>(bytes, pos);
    }
    if (pos != bytes.size()) throw Error(ErrorCode::IoFailure, "trailing bytes in checkpoint");
    return net;
}

} // namespace poseforge
