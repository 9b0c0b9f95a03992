#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "poseforge/config.hpp"
#include "poseforge/oks_reference.hpp"
#include "poseforge/verify.hpp"

namespace fs = std::filesystem;
using namespace poseforge;

namespace {

enum Exit { kOk = 0, kVerifyFailed = 1, kUsage = 2, kNumeric = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GlobalConfig load_config(const std::string& path) {
    return path.empty() ? default_global_config() : load_global_config(path);
}

// Config seed, then POSEFORGE_SEED, then --seed.
std::uint64_t resolve_seed(const GlobalConfig& g, const std::optional<std::uint64_t>& flag) {
    const std::uint64_t s = apply_seed_env(g.seed);
    return flag ? *flag : s;
}

void make_dirs(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir + ": " + ec.message());
}

std::string join(const std::string& a, const std::string& b) { return (fs::path(a) / b).string(); }

struct DatasetGenArgs {
    std::string config, out, style;
    int n_train = 200, n_val = 50;
    std::optional<std::uint64_t> seed;
};

int cmd_dataset_gen(const DatasetGenArgs& a) {
    const GlobalConfig g = load_config(a.config);
    StyleParams style = g.style;
    if (!a.style.empty()) style = style_params_from_json("\"" + a.style + "\"");
    const std::uint64_t seed = resolve_seed(g, a.seed);
    style.seed = derive_seed(seed, 3);
    const std::string out = a.out.empty() ? join(g.output_dir, "dataset") : a.out;
    const Manifest m = build_dataset(g.skeleton, g.figure, style, a.n_train, a.n_val, seed, out);
    std::cout << m.path << "\n";
    return kOk;
}

struct TrainArgs {
    std::string config, manifest, split = "train", out, tap;
    std::optional<int> steps, batch_size;
    std::optional<double> lr;
    std::optional<std::uint64_t> seed;
    bool no_recon = false;
    int log_every = 100;
};

int cmd_train(const TrainArgs& a) {
    GlobalConfig g = load_config(a.config);
    const std::uint64_t seed = resolve_seed(g, a.seed);
    TrainConfig tc = g.train;
    tc.seed = seed;
    if (a.steps) tc.steps = *a.steps;
    if (a.batch_size) tc.batch_size = *a.batch_size;
    if (a.lr) tc.lr = *a.lr;
    if (a.no_recon) tc.recon_enabled = false;
    validate_train_config(tc);
    NetConfig nc = g.net;
    if (!a.tap.empty()) {
        try {
            nc.tap = feature_tap_from_string(a.tap);
        } catch (const Error&) {
            throw UsageError("--tap must be 'last' or 'second-to-last'");
        }
    }

    const std::string manifest_path = a.manifest.empty() ? join(join(g.output_dir, "dataset"), "manifest.json") : a.manifest;
    if (!fs::exists(manifest_path)) throw Error(ErrorCode::IoFailure, "dataset manifest not found: " + manifest_path);
    const Manifest m = load_manifest(manifest_path);
    const LoadedSplit data = load_split(m.split(a.split), g.skeleton);

    const std::string out = a.out.empty() ? join(g.output_dir, "train") : a.out;
    make_dirs(out);
    MicroUNet net(nc, derive_seed(seed, 100));
    std::string log;
    TrainData td{&data.scenes, &g.skeleton, g.aug, g.heatmap};
    const int last = tc.steps - 1;
    const auto records = train(td, net, tc, [&](const StepRecord& r) {
        log += step_record_to_json(r) + "\n";
        if (a.log_every > 0 && (r.step % a.log_every == 0 || r.step == last))
            std::fprintf(stderr, "step %5d  loss %.6f  rgb %.6f  pose %.6f  |g| %.4f\n", r.step, r.loss_total,
                         r.loss_rgb, r.loss_pose, r.grad_norm);
    });
    write_file(join(out, "train_log.jsonl"), log);
    write_file(join(out, "checkpoint.bin"), net.save_checkpoint(static_cast<std::uint64_t>(tc.steps)));
    write_file(join(out, "net_config.json"), net_config_to_json(nc) + "\n");
    write_file(join(out, "train_config.json"), train_config_to_json(tc) + "\n");
    std::cout << join(out, "checkpoint.bin") << "\n";
    return kOk;
}

struct EvalArgs {
    std::string config, checkpoint, manifest, split = "val", annotations, images, detections, out, name;
    bool gt_boxes = false, flip_test = false, gt_roundtrip = false;
};

int cmd_eval(const EvalArgs& a) {
    const GlobalConfig g = load_config(a.config);
    if (!a.gt_roundtrip && a.checkpoint.empty()) throw UsageError("--checkpoint is required (or use --gt-roundtrip)");
    if (!a.gt_boxes && a.detections.empty() && !a.gt_roundtrip)
        throw UsageError("one of --gt-boxes or --detections is required");
    if (a.gt_boxes && !a.detections.empty()) throw UsageError("--gt-boxes and --detections are exclusive");

    SplitInfo split;
    if (!a.annotations.empty()) {
        if (a.images.empty()) throw UsageError("--annotations needs --images");
        split = {"custom", a.images, a.annotations, 0, 0};
    } else {
        const std::string mp = a.manifest.empty() ? join(join(g.output_dir, "dataset"), "manifest.json") : a.manifest;
        if (!fs::exists(mp)) throw Error(ErrorCode::IoFailure, "dataset manifest not found: " + mp);
        split = load_manifest(mp).split(a.split);
    }
    if (!fs::exists(split.annotations)) throw Error(ErrorCode::IoFailure, "annotations not found: " + split.annotations);
    const LoadedSplit data = load_split(split, g.skeleton);

    std::vector<PersonInstance> preds;
    ResultFile results;
    auto add = [&](const Prediction& p) {
        preds.push_back(p.instance);
        results.results.push_back(prediction_to_result(p));
    };
    std::map<long long, std::size_t> scene_of;
    for (std::size_t i = 0; i < data.annotations.images.size(); ++i) scene_of[data.annotations.images[i].id] = i;

    if (a.gt_roundtrip) {
        for (const auto& gt : data.annotations.annotations)
            if (gt.num_labeled() > 0) add(gt_roundtrip_instance(gt, g.skeleton, g.heatmap));
    } else {
        if (!fs::exists(a.checkpoint)) throw Error(ErrorCode::IoFailure, "checkpoint not found: " + a.checkpoint);
        MicroUNet net = MicroUNet::load_checkpoint(read_file(a.checkpoint));
        HeatmapConfig hm = g.heatmap;
        if (hm.input_size != net.config().input_size)
            hm = make_heatmap_config(net.config().input_size, hm.sigma, hm.supervise_occluded);
        auto run = [&](long long image_id, const BBox& box, double score) {
            const auto it = scene_of.find(image_id);
            if (it == scene_of.end()) throw Error(ErrorCode::DanglingImageId, "box refers to unknown image");
            Prediction p = predict_instance(net, data.scenes[it->second].image, box, g.skeleton, hm, a.flip_test, score);
            p.instance.image_id = image_id;
            add(p);
        };
        if (a.gt_boxes) {
            for (const auto& gt : data.annotations.annotations)
                if (gt.num_labeled() > 0) run(gt.image_id, gt.bbox, 1.0);
        } else {
            if (!fs::exists(a.detections)) throw Error(ErrorCode::IoFailure, "detections not found: " + a.detections);
            for (const auto& d : parse_detections(read_file(a.detections)).detections) run(d.image_id, d.bbox, d.score);
        }
    }

    const EvalReport report = evaluate(data.annotations, preds, g.oks);
    const std::string name = a.name.empty() ? (a.gt_roundtrip ? "gt-roundtrip" : split.name) : a.name;
    const std::string out = a.out.empty() ? join(g.output_dir, "eval_" + name) : a.out;
    make_dirs(out);
    const std::string table = report_to_table({{name, report}});
    write_file(join(out, "results.json"), write_results(results));
    write_file(join(out, "report.json"), report_to_json(report));
    write_file(join(out, "report.txt"), table);
    write_file(join(out, "pr_curves.svg"), report_to_svg(report));
    std::cout << table;
    return kOk;
}

struct CodecArgs {
    int n = 1000;
    std::optional<std::uint64_t> seed;
    std::vector<double> sigmas{1.5, 2.0, 3.0};
    double tol = 0.05, flip_tol = 0.1;
    std::string config, annotations, in, out;
    int index = 0;
};

int cmd_codec_roundtrip(const CodecArgs& a) {
    const CodecReport r = codec_roundtrip(a.n, resolve_seed(load_config(a.config), a.seed), a.sigmas);
    std::printf("codec roundtrip: %d keypoints, max error %.3e heatmap px, mean %.3e\n", r.n, r.max_error,
                r.mean_error);
    if (!(r.max_error < a.tol)) {
        std::printf("FAIL: max error %.6f >= %.6f heatmap px\n", r.max_error, a.tol);
        return kVerifyFailed;
    }
    return kOk;
}

int cmd_codec_flip(const CodecArgs& a) {
    const GlobalConfig g = load_config(a.config);
    const CodecReport r = flip_consistency(a.n, resolve_seed(g, a.seed), g.skeleton);
    std::printf("flip consistency: %d keypoints, max error %.3e input px, mean %.3e\n", r.n, r.max_error,
                r.mean_error);
    if (!(r.max_error < a.flip_tol)) {
        std::printf("FAIL: max error %.6f >= %.6f px\n", r.max_error, a.flip_tol);
        return kVerifyFailed;
    }
    return kOk;
}

int cmd_codec_encode(const CodecArgs& a) {
    const GlobalConfig g = load_config(a.config);
    const AnnotationFile f = parse_annotations(read_file(a.annotations), g.skeleton);
    if (a.index < 0 || a.index >= static_cast<int>(f.annotations.size()))
        throw UsageError("--index out of range (file has " + std::to_string(f.annotations.size()) + " annotations)");
    const PersonInstance& gt = f.annotations[static_cast<std::size_t>(a.index)];
    const Affine2D t = crop_affine(bbox_to_crop(gt.bbox, g.heatmap.input_size));
    PersonInstance local = gt;
    for (auto& kp : local.keypoints) {
        const auto [x, y] = t.apply(kp.x, kp.y);
        kp.x = x;
        kp.y = y;
    }
    write_file(a.out, serialize_heatmap(encode(local, g.heatmap, g.skeleton)));
    std::cout << a.out << "\n";
    return kOk;
}

int cmd_codec_decode(const CodecArgs& a) {
    const Heatmap hm = deserialize_heatmap(read_file(a.in));
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& k : decode(hm)) j.push_back({{"x", k.x}, {"y", k.y}, {"confidence", k.confidence}});
    std::cout << j.dump(2) << "\n";
    return kOk;
}

struct GradcheckArgs {
    std::optional<std::uint64_t> seed;
    bool corrupt = false;
    double tol = 1e-4;
    double h = 1e-3;
    int order = 4;
    std::size_t rows = 10;
};

int cmd_gradcheck(const GradcheckArgs& a) {
    GradcheckOptions opts;
    opts.h = a.h;
    opts.order = a.order;
    const GradcheckReport r = gradcheck_tiny(resolve_seed(default_global_config(), a.seed), a.corrupt, opts);
    std::cout << gradcheck_report_text(r, a.rows);
    if (!(r.max_rel_error < a.tol)) {
        std::printf("FAIL: %s relative error %.3e exceeds %.1e\n", r.entries.front().name.c_str(), r.max_rel_error,
                    a.tol);
        return kVerifyFailed;
    }
    return kOk;
}

struct SelftestArgs {
    int n = 50;
    std::optional<std::uint64_t> seed;
    std::string config;
};

int cmd_oks_selftest(const SelftestArgs& a) {
    const GlobalConfig g = load_config(a.config);
    const SelftestResult r = oks_selftest(a.n, resolve_seed(g, a.seed), g.skeleton);
    std::printf("oks selftest: %d random scenes, %d mismatches; threshold ladder AP %.4f AR %.4f\n", r.cases,
                r.mismatches, r.ladder_ap, r.ladder_ar);
    if (!r.ok()) {
        std::printf("FAIL: %s\n", r.first_failure.c_str());
        return kVerifyFailed;
    }
    return kOk;
}

struct StylizeArgs {
    std::string in, out, preset = "monet-like";
    std::optional<double> hue, saturation, blur, noise;
    std::optional<std::uint64_t> seed;
};

int cmd_stylize(const StylizeArgs& a) {
    StyleParams s = style_params_from_json("\"" + a.preset + "\"");
    if (a.hue) s.hue_degrees = *a.hue;
    if (a.saturation) s.saturation = *a.saturation;
    if (a.blur) s.blur_sigma = *a.blur;
    if (a.noise) s.noise_amplitude = *a.noise;
    if (a.seed) s.seed = *a.seed;
    s.seed = apply_seed_env(s.seed);
    if (!(s.noise_amplitude >= 0.0 && s.noise_amplitude < 1.0)) throw UsageError("--noise must lie in [0, 1)");
    if (!fs::exists(a.in)) throw Error(ErrorCode::IoFailure, "input image not found: " + a.in);
    const Image img = read_ppm(a.in);
    const Image out = stylize(img, s);
    write_ppm(a.out, out);
    std::printf("%s (mean abs difference %.4f)\n", a.out.c_str(), mean_abs_difference(img, out));
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"poseforge: desk-scale diffusion-backbone pose estimation toolkit"};
    app.require_subcommand(1);
    std::function<int()> action;

    DatasetGenArgs dg;
    auto* c_dg = app.add_subcommand("dataset-gen", "Render the synthetic train/val/stylized-val dataset");
    c_dg->add_option("--config", dg.config, "Top-level config JSON");
    c_dg->add_option("--out", dg.out, "Output directory (default <output_dir>/dataset)");
    c_dg->add_option("--n-train", dg.n_train, "Training scenes")->check(CLI::PositiveNumber);
    c_dg->add_option("--n-val", dg.n_val, "Validation scenes")->check(CLI::PositiveNumber);
    c_dg->add_option("--seed", dg.seed, "Global seed (overrides config and POSEFORGE_SEED)");
    c_dg->add_option("--style", dg.style, "Stylization preset: monet-like or neutral");
    c_dg->callback([&] { action = [&] { return cmd_dataset_gen(dg); }; });

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the multi-task network on a dataset split");
    c_tr->add_option("--config", tr.config, "Top-level config JSON");
    c_tr->add_option("--manifest", tr.manifest, "Dataset manifest (default <output_dir>/dataset/manifest.json)");
    c_tr->add_option("--split", tr.split, "Split to train on");
    c_tr->add_option("--out", tr.out, "Output directory (default <output_dir>/train)");
    c_tr->add_option("--steps", tr.steps, "Optimization steps")->check(CLI::NonNegativeNumber);
    c_tr->add_option("--batch-size", tr.batch_size, "Samples per step")->check(CLI::PositiveNumber);
    c_tr->add_option("--lr", tr.lr, "Learning rate");
    c_tr->add_option("--seed", tr.seed, "Global seed (overrides config and POSEFORGE_SEED)");
    c_tr->add_flag("--no-recon", tr.no_recon, "Disable the RGB reconstruction term");
    c_tr->add_option("--tap", tr.tap, "Decoder stage feeding the pose head: last or second-to-last");
    c_tr->add_option("--log-every", tr.log_every, "Progress line interval on stderr (0: silent)");
    c_tr->callback([&] { action = [&] { return cmd_train(tr); }; });

    EvalArgs ev;
    auto* c_ev = app.add_subcommand("eval", "Run inference on a split and compute COCO keypoint AP/AR");
    c_ev->add_option("--config", ev.config, "Top-level config JSON");
    c_ev->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint");
    c_ev->add_option("--manifest", ev.manifest, "Dataset manifest (default <output_dir>/dataset/manifest.json)");
    c_ev->add_option("--split", ev.split, "Manifest split: val or val_stylized");
    c_ev->add_option("--annotations", ev.annotations, "Annotation file (instead of --manifest)");
    c_ev->add_option("--images", ev.images, "Image directory for --annotations");
    c_ev->add_flag("--gt-boxes", ev.gt_boxes, "Crop with ground-truth boxes");
    c_ev->add_option("--detections", ev.detections, "Person detections JSON");
    c_ev->add_flag("--flip-test", ev.flip_test, "Average with the flipped-input heatmap");
    c_ev->add_flag("--gt-roundtrip", ev.gt_roundtrip, "Evaluate encoded-then-decoded ground truth (no network)");
    c_ev->add_option("--out", ev.out, "Output directory (default <output_dir>/eval_<name>)");
    c_ev->add_option("--name", ev.name, "Row label in the report table");
    c_ev->callback([&] { action = [&] { return cmd_eval(ev); }; });

    CodecArgs co;
    auto* c_co = app.add_subcommand("codec", "Heatmap codec checks and conversions");
    c_co->require_subcommand(1);
    auto* c_rt = c_co->add_subcommand("roundtrip", "encode -> decode on random keypoints");
    c_rt->add_option("--n", co.n, "Keypoints per sigma")->check(CLI::PositiveNumber);
    c_rt->add_option("--seed", co.seed, "Seed (overrides POSEFORGE_SEED)");
    c_rt->add_option("--config", co.config, "Top-level config JSON (seed)");
    c_rt->add_option("--sigma", co.sigmas, "Gaussian sigmas in heatmap px")->delimiter(',');
    c_rt->add_option("--tol", co.tol, "Maximum allowed error in heatmap px");
    c_rt->callback([&] { action = [&] { return cmd_codec_roundtrip(co); }; });
    auto* c_fl = c_co->add_subcommand("flip", "encode -> flip_heatmap -> decode against mirrored keypoints");
    c_fl->add_option("--n", co.n, "Keypoints")->check(CLI::PositiveNumber);
    c_fl->add_option("--seed", co.seed, "Seed (overrides config and POSEFORGE_SEED)");
    c_fl->add_option("--tol", co.flip_tol, "Maximum allowed error in input px");
    c_fl->add_option("--config", co.config, "Top-level config JSON (skeleton)");
    c_fl->callback([&] { action = [&] { return cmd_codec_flip(co); }; });
    auto* c_en = c_co->add_subcommand("encode", "Encode one annotation's crop into a heatmap blob");
    c_en->add_option("--config", co.config, "Top-level config JSON");
    c_en->add_option("--annotations", co.annotations, "Annotation file")->required();
    c_en->add_option("--index", co.index, "Annotation index");
    c_en->add_option("--out", co.out, "Heatmap blob to write")->required();
    c_en->callback([&] { action = [&] { return cmd_codec_encode(co); }; });
    auto* c_de = c_co->add_subcommand("decode", "Decode a heatmap blob to keypoints (JSON on stdout)");
    c_de->add_option("--in", co.in, "Heatmap blob")->required();
    c_de->callback([&] { action = [&] { return cmd_codec_decode(co); }; });

    GradcheckArgs gc;
    auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient check on the tiny network");
    c_gc->add_option("--seed", gc.seed, "Seed for weights and inputs (overrides POSEFORGE_SEED)");
    c_gc->add_flag("--corrupt", gc.corrupt, "Perturb one analytic gradient block (checker sensitivity fixture)");
    c_gc->add_option("--tol", gc.tol, "Maximum allowed relative error");
    c_gc->add_option("--step", gc.h, "Central-difference step");
    c_gc->add_option("--order", gc.order, "Difference stencil: 2 or 4")->check(CLI::IsMember({2, 4}));
    c_gc->add_option("--rows", gc.rows, "Report rows to print (0: all)");
    c_gc->callback([&] { action = [&] { return cmd_gradcheck(gc); }; });

    SelftestArgs st;
    auto* c_st = app.add_subcommand("oks-selftest", "Compare evaluate() against the brute-force evaluator");
    c_st->add_option("--n", st.n, "Random scenes")->check(CLI::PositiveNumber);
    c_st->add_option("--seed", st.seed, "Seed (overrides config and POSEFORGE_SEED)");
    c_st->add_option("--config", st.config, "Top-level config JSON (skeleton)");
    c_st->callback([&] { action = [&] { return cmd_oks_selftest(st); }; });

    StylizeArgs sy;
    auto* c_sy = app.add_subcommand("stylize", "Apply the appearance shift to one PPM image");
    c_sy->add_option("--in", sy.in, "Input PPM")->required();
    c_sy->add_option("--out", sy.out, "Output PPM")->required();
    c_sy->add_option("--preset", sy.preset, "monet-like or neutral");
    c_sy->add_option("--hue", sy.hue, "Hue rotation, degrees");
    c_sy->add_option("--saturation", sy.saturation, "Saturation scale");
    c_sy->add_option("--blur", sy.blur, "Brush blur sigma, px");
    c_sy->add_option("--noise", sy.noise, "Texture noise amplitude in [0, 1)");
    c_sy->add_option("--seed", sy.seed, "Texture seed");
    c_sy->callback([&] { action = [&] { return cmd_stylize(sy); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    try {
        return action ? action() : kUsage;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::NumericFailure ? kNumeric : kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
}
