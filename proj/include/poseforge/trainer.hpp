#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poseforge/micronet.hpp"
#include "poseforge/pipeline.hpp"

namespace poseforge {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
    double lr = 3e-3;
    int steps = 2000;
    int batch_size = 8;
    std::uint64_t seed = 0;
    double w_rgb = 1.0;
    double w_pose = 1.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0; // decoupled, Adam only
    bool recon_enabled = true;
    bool augment = true;

    bool operator==(const TrainConfig&) const = default;
};

/// Throws InvalidConfig.
void validate_train_config(const TrainConfig& cfg);

struct StepRecord {
    int step = 0;
    double loss_total = 0.0;
    double loss_rgb = 0.0;
    double loss_pose = 0.0;
    double grad_norm = 0.0;
};

std::string step_record_to_json(const StepRecord& r);

/// Recorded forward passes for one sample. Both task passes share one tape so a
/// single backward sums the two gradients.
struct LossContext {
    nn::Tape tape;
    nn::Var total;
    nn::Var rgb;
    nn::Var pose;
    double loss_total = 0.0;
    double loss_rgb = 0.0;
    double loss_pose = 0.0;
};

/// w_rgb * ||z_rgb - f(z, t, C_rgb)||^2 + w_pose * ||H - f(z, t, C_pose)||^2,
/// each as a mean over elements (pose restricted to masked-in channels). With
/// recon disabled the RGB pass is skipped and its term is exactly 0.
std::unique_ptr<LossContext> multitask_loss(MicroUNet& net, const Image& img, const Heatmap& gt_heatmap,
                                            const std::vector<bool>& mask, const TrainConfig& cfg);

/// Accumulates d(total)/d(theta) into every trainable parameter's grad.
void backward(LossContext& ctx);

class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
    void step(std::vector<nn::Parameter>& params);

private:
    TrainConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    long long t_ = 0;
};

using StepCallback = std::function<void(const StepRecord&)>;

struct TrainData {
    const std::vector<Scene>* scenes = nullptr;
    const SkeletonSpec* spec = nullptr;
    AugConfig aug;
    HeatmapConfig hm_cfg;
};

/// Deterministic in (data, net init, cfg): sample order, augmentation draws
/// and updates depend only on cfg.seed. Throws EmptyDataset or NumericFailure.
std::vector<StepRecord> train(const TrainData& data, MicroUNet& net, const TrainConfig& cfg,
                              const StepCallback& on_step = {});

struct GradcheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    double block_rel_error = 0.0;
    std::size_t checked = 0;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries; // sorted by max_rel_error, descending
    double max_rel_error = 0.0;
    double max_block_rel_error = 0.0;
};

struct GradcheckOptions {
    double h = 1e-3;
    // 2: (f(x+h) - f(x-h)) / 2h. 4: the five-point central stencil.
    int order = 4;
    // Relative error is |a - n| / max(|a|, |n|, abs_floor).
    double abs_floor = 1e-6;
    std::size_t max_per_block = 0; // 0: every element
};

/// Central differences against analytic gradients for the given parameters.
/// `loss` evaluates the scalar loss; `analytic` fills Parameter::grad.
GradcheckReport gradcheck(const std::vector<nn::Parameter*>& params, const std::function<double()>& loss,
                          const std::function<void()>& analytic, const GradcheckOptions& opts = {});

/// Gradcheck of the full multitask loss over all trainable network parameters.
GradcheckReport gradcheck(MicroUNet& net, const Image& img, const Heatmap& target, const std::vector<bool>& mask,
                          const TrainConfig& cfg, const GradcheckOptions& opts = {});

/// Tiny network config used by gradient verification (base 4, 16x16 input).
NetConfig tiny_net_config(int K = 17);

} // namespace poseforge
