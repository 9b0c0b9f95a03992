#include "poseforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace poseforge {

void validate_train_config(const TrainConfig& cfg) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (!(cfg.lr >= 0.0)) fail("lr must be >= 0");
    if (cfg.steps < 0) fail("steps must be >= 0");
    if (cfg.batch_size < 1) fail("batch_size must be positive");
    if (!(cfg.w_rgb >= 0.0 && cfg.w_pose >= 0.0)) fail("loss weights must be >= 0");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) fail("betas must lie in [0, 1)");
    if (!(cfg.eps > 0.0)) fail("eps must be positive");
    if (!(cfg.weight_decay >= 0.0)) fail("weight_decay must be >= 0");
}

std::string step_record_to_json(const StepRecord& r) {
    nlohmann::json j{{"step", r.step},
                     {"loss_total", r.loss_total},
                     {"loss_rgb", r.loss_rgb},
                     {"loss_pose", r.loss_pose},
                     {"grad_norm", r.grad_norm}};
    return j.dump();
}

std::unique_ptr<LossContext> multitask_loss(MicroUNet& net, const Image& img, const Heatmap& gt_heatmap,
                                            const std::vector<bool>& mask, const TrainConfig& cfg) {
    auto ctx = std::make_unique<LossContext>();
    nn::Tape& t = ctx->tape;
    const nn::Tensor z_rgb = net.encode_latent(img);
    nn::Var z = t.constant(z_rgb);

    nn::Tensor target({gt_heatmap.K, gt_heatmap.height(), gt_heatmap.width()});
    target.data = gt_heatmap.data;
    const auto pose_out = net.forward(t, z, Task::Pose);
    if (!t.value(pose_out.out).same_shape(target))
        throw Error(ErrorCode::ShapeMismatch, "pose output and heatmap target differ in shape");
    ctx->pose = nn::masked_mse(t, pose_out.out, target, mask);

    if (cfg.recon_enabled) {
        const auto rgb_out = net.forward(t, z, Task::Rgb);
        ctx->rgb = nn::masked_mse(t, rgb_out.out, z_rgb, std::vector<bool>(z_rgb.shape[0], true));
    } else {
        ctx->rgb = t.constant(nn::Tensor({1, 1, 1}, 0.0));
    }
    ctx->total = nn::weighted_sum(t, ctx->rgb, cfg.w_rgb, ctx->pose, cfg.w_pose);
    ctx->loss_rgb = t.value(ctx->rgb).data[0];
    ctx->loss_pose = t.value(ctx->pose).data[0];
    ctx->loss_total = t.value(ctx->total).data[0];
    return ctx;
}

void backward(LossContext& ctx) { ctx.tape.backward(ctx.total); }

void Optimizer::step(std::vector<nn::Parameter>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.trainable) continue;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad.data[j];
            if (cfg_.optimizer == OptimizerKind::Sgd) {
                p.value.data[j] -= cfg_.lr * g;
                continue;
            }
            double& m = m_[i][j];
            double& v = v_[i][j];
            m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
            v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
            const double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
            p.value.data[j] -= cfg_.lr * (update + cfg_.weight_decay * p.value.data[j]);
        }
    }
}

std::vector<StepRecord> train(const TrainData& data, MicroUNet& net, const TrainConfig& cfg,
                              const StepCallback& on_step) {
    validate_train_config(cfg);
    if (!data.scenes || !data.spec) throw Error(ErrorCode::EmptyDataset, "no dataset");
    struct Item {
        std::size_t scene, person;
    };
    std::vector<Item> items;
    for (std::size_t s = 0; s < data.scenes->size(); ++s) {
        const auto& people = (*data.scenes)[s].people;
        for (std::size_t p = 0; p < people.size(); ++p)
            if (people[p].num_labeled() > 0) items.push_back({s, p});
    }
    if (items.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no labeled person");

    Rng order_rng(derive_seed(cfg.seed, 0xA11CE));
    std::vector<std::size_t> order(items.size());
    std::size_t cursor = order.size();
    auto next_item = [&]() {
        if (cursor == order.size()) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
            cursor = 0;
        }
        return items[order[cursor++]];
    };

    Optimizer opt(cfg);
    std::vector<StepRecord> log;
    log.reserve(static_cast<std::size_t>(cfg.steps));
    const double inv_b = 1.0 / cfg.batch_size;
    for (int step = 0; step < cfg.steps; ++step) {
        net.zero_grad();
        StepRecord rec;
        rec.step = step;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const Item it = next_item();
            const Scene& scene = (*data.scenes)[it.scene];
            Rng sample_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(step) * cfg.batch_size + b + 1));
            const TrainSample s = make_train_sample(scene.image, scene.people[it.person], *data.spec, data.aug,
                                                    data.hm_cfg, sample_rng, cfg.augment);
            auto ctx = multitask_loss(net, s.input, s.heatmap, s.mask, cfg);
            backward(*ctx);
            rec.loss_total += ctx->loss_total * inv_b;
            rec.loss_rgb += ctx->loss_rgb * inv_b;
            rec.loss_pose += ctx->loss_pose * inv_b;
        }
        double norm2 = 0.0;
        for (auto& p : net.parameters()) {
            if (!p.trainable) continue;
            for (auto& g : p.grad.data) {
                g *= inv_b;
                norm2 += g * g;
            }
        }
        rec.grad_norm = std::sqrt(norm2);
        if (!std::isfinite(rec.loss_total) || !std::isfinite(rec.grad_norm))
            throw Error(ErrorCode::NumericFailure, "non-finite loss at step " + std::to_string(step));
        opt.step(net.parameters());
        log.push_back(rec);
        if (on_step) on_step(rec);
    }
    return log;
}

GradcheckReport gradcheck(const std::vector<nn::Parameter*>& params, const std::function<double()>& loss,
                          const std::function<void()>& analytic, const GradcheckOptions& opts) {
    for (auto* p : params) p->zero_grad();
    analytic();
    GradcheckReport report;
    for (auto* p : params) {
        if (!p->trainable) continue;
        GradcheckEntry e;
        e.name = p->name;
        const std::size_t n = p->value.size();
        double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
        const std::size_t stride = opts.max_per_block == 0 || n <= opts.max_per_block ? 1 : n / opts.max_per_block;
        for (std::size_t j = 0; j < n; j += stride) {
            const double orig = p->value.data[j];
            auto at = [&](double offset) {
                p->value.data[j] = orig + offset;
                const double v = loss();
                p->value.data[j] = orig;
                return v;
            };
            const double h = opts.h;
            const double numeric = opts.order == 4
                                       ? (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12.0 * h)
                                       : (at(h) - at(-h)) / (2.0 * h);
            const double a = p->grad.data[j];
            const double abs_err = std::fabs(a - numeric);
            const double rel = abs_err / std::max({std::fabs(a), std::fabs(numeric), opts.abs_floor});
            diff2 += abs_err * abs_err;
            a2 += a * a;
            n2 += numeric * numeric;
            e.max_abs_error = std::max(e.max_abs_error, abs_err);
            e.max_rel_error = std::max(e.max_rel_error, rel);
            ++e.checked;
        }
        e.block_rel_error = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), opts.abs_floor});
        report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
        report.max_block_rel_error = std::max(report.max_block_rel_error, e.block_rel_error);
        report.entries.push_back(std::move(e));
    }
    std::stable_sort(report.entries.begin(), report.entries.end(),
                     [](const auto& a, const auto& b) { return a.max_rel_error > b.max_rel_error; });
    return report;
}

GradcheckReport gradcheck(MicroUNet& net, const Image& img, const Heatmap& target, const std::vector<bool>& mask,
                          const TrainConfig& cfg, const GradcheckOptions& opts) {
    std::vector<nn::Parameter*> params;
    for (auto& p : net.parameters())
        if (p.trainable) params.push_back(&p);
    return gradcheck(
        params, [&] { return multitask_loss(net, img, target, mask, cfg)->loss_total; },
        [&] {
            auto ctx = multitask_loss(net, img, target, mask, cfg);
            backward(*ctx);
        },
        opts);
}

NetConfig tiny_net_config(int K) {
    NetConfig c;
    c.input_size = {16, 16};
    c.base_channels = 4;
    c.channel_mult = {1, 2, 2};
    c.depth = 3;
    c.K = K;
    c.embed_dim = 4;
    c.head_channels = 4;
    // He-uniform keeps activations away from the flat GroupNorm regime that
    // makes finite differences unreliable on 1x1 feature maps.
    c.init_gain = std::sqrt(6.0);
    return c;
}

} // namespace poseforge
