#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "poseforge/autograd.hpp"
#include "poseforge/image.hpp"

namespace poseforge {

enum class FeatureTap { Last, SecondToLast };
enum class Task { Rgb, Pose };

const char* to_string(FeatureTap tap);
FeatureTap feature_tap_from_string(const std::string& s);

struct NetConfig {
    Size input_size{48, 64};
    int latent_stride = 8;
    int latent_channels = 4;
    int base_channels = 16;
    int depth = 3;
    std::vector<int> channel_mult{1, 2, 2};
    int K = 17;
    int embed_dim = 8;
    int head_channels = 16;
    FeatureTap tap = FeatureTap::Last;
    // 0: K-channel pose head. Otherwise the head emits this many channels and
    // a frozen random map expands them to K.
    int pose_bottleneck_channels = 0;
    // Channels per GroupNorm group; a layer with C channels uses gcd(C, group_size).
    int group_size = 4;
    int timestep = 1000;
    // Uniform init bound is init_gain / sqrt(fan_in) for trainable layers.
    double init_gain = 1.0;

    bool operator==(const NetConfig&) const = default;
};

/// Throws InvalidConfig.
void validate_net_config(const NetConfig& cfg);

/// One-hot class label: [0, 1] selects RGB reconstruction, [1, 0] pose.
struct TaskEmbedding {
    std::array<double, 2> label{};

    static TaskEmbedding rgb() { return {{0.0, 1.0}}; }
    static TaskEmbedding pose() { return {{1.0, 0.0}}; }
    static TaskEmbedding of(Task t) { return t == Task::Rgb ? rgb() : pose(); }
    bool is_valid() const;
};

struct DiffusionSchedule {
    std::vector<double> betas;
    std::vector<double> alphas_cumprod;
    int fixed_t = 1000;

    int T() const { return static_cast<int>(betas.size()); }
    /// alpha for 1-based timestep t. Throws TimestepOutOfRange.
    double alpha(int t) const;
};

/// Linear beta ramp from beta_lo to beta_hi over T steps. Throws InvalidRange.
DiffusionSchedule make_schedule(int T, double beta_lo, double beta_hi);

/// (z_t - sqrt(1 - alpha) eps) / sqrt(alpha), elementwise.
std::vector<double> eps_to_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat, double alpha_t);
std::vector<double> eps_to_x0(const std::vector<double>& z_t, const std::vector<double>& eps_hat,
                              const DiffusionSchedule& sched, int t);
/// sqrt(alpha) x0 + sqrt(1 - alpha) eps.
std::vector<double> add_noise(const std::vector<double>& x0, const std::vector<double>& eps, double alpha_t);

class MicroUNet {
public:
    struct Output {
        nn::Var out;
        nn::Var tapped;
    };

    MicroUNet() = default;
    MicroUNet(const NetConfig& cfg, std::uint64_t seed);

    const NetConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    /// All parameters in declaration order (frozen ones included).
    std::vector<nn::Parameter>& parameters() { return params_; }
    const std::vector<nn::Parameter>& parameters() const { return params_; }
    std::vector<nn::Parameter*> parameters_with_prefix(const std::string& prefix);
    void zero_grad();

    /// Image -> {latent_channels, H/8, W/8}, through the frozen patch encoder.
    nn::Tensor encode_latent(const Image& img) const;
    static nn::Tensor image_to_tensor(const Image& img);

    /// Conditioned U-Net pass; `tapped` is the decoder stage selected by
    /// NetConfig::tap. RGB task returns the recon head output at latent
    /// resolution; Pose task returns the pose head output at 1/4 input size.
    Output forward(nn::Tape& tape, nn::Var latent, Task task);

    /// Single-step inference: one forward pass, no noise.
    nn::Tensor predict(const Image& img, Task task);

    std::string save_checkpoint(std::uint64_t step) const;
    static MicroUNet load_checkpoint(const std::string& bytes, std::uint64_t* step = nullptr);

    bool operator==(const MicroUNet& o) const;

private:
    struct ResBlock {
        std::size_t gn1_g, gn1_b, conv1_w, conv1_b, emb_w, emb_b, gn2_g, gn2_b, conv2_w, conv2_b;
        std::size_t skip_w = 0, skip_b = 0;
        bool has_skip = false;
    };

    std::size_t add_param(const std::string& name, std::vector<int> shape, bool trainable = true);
    ResBlock make_block(const std::string& name, int cin, int cout);
    nn::Var run_block(nn::Tape& t, const ResBlock& b, nn::Var x, nn::Var emb);
    void init_parameters();
    int group_for(int c) const { return std::gcd(c, cfg_.group_size); }
    int channels(int level) const { return cfg_.base_channels * cfg_.channel_mult[static_cast<std::size_t>(level)]; }

    NetConfig cfg_;
    std::uint64_t seed_ = 0;
    std::vector<nn::Parameter> params_;

    std::size_t enc_w_ = 0, enc_b_ = 0;
    std::size_t cond_w_ = 0, cond_b_ = 0;
    std::size_t stem_w_ = 0, stem_b_ = 0;
    std::vector<ResBlock> down_blocks_;
    std::vector<std::size_t> down_w_, down_b_;
    ResBlock mid_{};
    std::vector<ResBlock> up_blocks_;
    std::size_t recon_w_ = 0, recon_b_ = 0;
    std::size_t deconv_w_ = 0, deconv_b_ = 0, head_gn_g_ = 0, head_gn_b_ = 0;
    std::size_t head1_w_ = 0, head1_b_ = 0, head2_w_ = 0, head2_b_ = 0;
    std::size_t expand_ = 0;
    bool has_expand_ = false;
};

} // namespace poseforge
