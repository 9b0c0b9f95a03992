#include "poseforge/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "poseforge/geometry.hpp"

namespace poseforge {

namespace fs = std::filesystem;

std::vector<Rgb> FigureParams::default_palette() {
    // Edge order follows the COCO-17 skeleton: left limbs warm, right limbs
    // cool, torso and face neutral.
    return {{1.0f, 0.55f, 0.0f}, {1.0f, 0.85f, 0.1f}, {0.0f, 0.6f, 1.0f}, {0.2f, 0.9f, 1.0f}, {0.9f, 0.9f, 0.9f},
            {1.0f, 0.3f, 0.3f},  {0.3f, 0.4f, 1.0f},  {0.95f, 0.95f, 0.6f}, {0.95f, 0.1f, 0.1f}, {0.1f, 0.2f, 0.9f},
            {1.0f, 0.7f, 0.6f},  {0.5f, 1.0f, 0.6f},  {1.0f, 0.3f, 1.0f}, {1.0f, 0.5f, 0.9f},  {0.6f, 0.5f, 1.0f},
            {1.0f, 0.8f, 1.0f},  {0.8f, 0.7f, 1.0f},  {0.9f, 0.6f, 0.3f}, {0.3f, 0.7f, 0.6f}};
}

void validate_figure_params(const FigureParams& p) {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
    if (p.image_size.w < 8 || p.image_size.h < 8) fail("image_size too small");
    for (double len : {p.torso_len, p.shoulder_half_width, p.hip_half_width, p.neck_len, p.upper_arm_len,
                       p.forearm_len, p.thigh_len, p.shin_len})
        if (!(len > 0.0)) fail("limb lengths must be positive");
    for (const Range& r : {p.figure_height, p.torso_lean, p.upper_arm, p.forearm_bend, p.thigh, p.knee_bend,
                           p.head_turn})
        if (!(r.first <= r.second)) fail("empty range");
    if (!(p.figure_height.first > 0.0)) fail("figure_height must be positive");
    if (!(p.limb_thickness > 0.0)) fail("limb_thickness must be positive");
    if (p.palette.empty()) fail("palette is empty");
    if (p.backgrounds.empty()) fail("backgrounds is empty");
    if (p.max_figures < 1) fail("max_figures must be >= 1");
}

namespace {

struct Vec {
    double x, y;
    Vec operator+(Vec o) const { return {x + o.x, y + o.y}; }
    Vec operator-(Vec o) const { return {x - o.x, y - o.y}; }
    Vec operator*(double s) const { return {x * s, y * s}; }
};

double deg(double d) { return d * M_PI / 180.0; }

// Unit vector at `a` degrees from straight down, positive towards +x.
Vec down_dir(double a) { return {std::sin(deg(a)), std::cos(deg(a))}; }

double segment_distance(Vec p, Vec a, Vec b) {
    const Vec ab = b - a, ap = p - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = len2 > 0.0 ? (ap.x * ab.x + ap.y * ab.y) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec d = ap - ab * t;
    return std::hypot(d.x, d.y);
}

std::vector<Vec> pose_figure(const FigureParams& p, Vec hip_c, double H, Rng& rng) {
    const double lean = rng.uniform(p.torso_lean.first, p.torso_lean.second);
    const double turn = rng.uniform(p.head_turn.first, p.head_turn.second);
    double limb[8];
    limb[0] = rng.uniform(p.upper_arm.first, p.upper_arm.second);
    limb[1] = rng.uniform(p.upper_arm.first, p.upper_arm.second);
    limb[2] = rng.uniform(p.forearm_bend.first, p.forearm_bend.second);
    limb[3] = rng.uniform(p.forearm_bend.first, p.forearm_bend.second);
    limb[4] = rng.uniform(p.thigh.first, p.thigh.second);
    limb[5] = rng.uniform(p.thigh.first, p.thigh.second);
    limb[6] = rng.uniform(p.knee_bend.first, p.knee_bend.second);
    limb[7] = rng.uniform(p.knee_bend.first, p.knee_bend.second);

    const Vec up{std::sin(deg(lean)), -std::cos(deg(lean))};
    const Vec side{std::cos(deg(lean)), std::sin(deg(lean))}; // towards the figure's left (image +x)
    std::vector<Vec> k(17);
    const Vec neck = hip_c + up * (p.torso_len * H);
    const Vec head = neck + up * (p.neck_len * H);
    k[0] = head + side * (turn * 0.03 * H) - up * (0.01 * H);
    k[1] = head + side * ((0.03 + 0.02 * turn) * H) + up * (0.02 * H);
    k[2] = head - side * ((0.03 - 0.02 * turn) * H) + up * (0.02 * H);
    k[3] = head + side * ((0.06 + 0.01 * turn) * H);
    k[4] = head - side * ((0.06 - 0.01 * turn) * H);
    k[5] = neck + side * (p.shoulder_half_width * H);
    k[6] = neck - side * (p.shoulder_half_width * H);
    k[11] = hip_c + side * (p.hip_half_width * H);
    k[12] = hip_c - side * (p.hip_half_width * H);
    // Left limbs swing outward towards +x, right limbs towards -x.
    for (int s = 0; s < 2; ++s) {
        const double sign = s == 0 ? 1.0 : -1.0;
        const double ua = lean + sign * limb[s];
        const double fa = ua + sign * limb[2 + s];
        k[7 + s] = k[5 + s] + down_dir(ua) * (p.upper_arm_len * H);
        k[9 + s] = k[7 + s] + down_dir(fa) * (p.forearm_len * H);
        const double th = sign * limb[4 + s];
        const double sh = th - sign * limb[6 + s];
        k[13 + s] = k[11 + s] + down_dir(th) * (p.thigh_len * H);
        k[15 + s] = k[13 + s] + down_dir(sh) * (p.shin_len * H);
    }
    return k;
}

Rgb random_muted(Rng& rng) {
    return {static_cast<float>(rng.uniform(0.0, 0.45)), static_cast<float>(rng.uniform(0.0, 0.45)),
            static_cast<float>(rng.uniform(0.0, 0.45))};
}

void paint_background(Image& img, Background bg, Rng& rng) {
    const Rgb a = random_muted(rng), b = random_muted(rng);
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    Rng clutter(rng.next());
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double span = std::abs(ca) * img.width + std::abs(sa) * img.height;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            float t = 0.0f;
            if (bg != Background::Flat) {
                const double proj = (x - img.width / 2.0) * ca + (y - img.height / 2.0) * sa;
                t = static_cast<float>(std::clamp(proj / span + 0.5, 0.0, 1.0));
            }
            img.at(x, y, 0) = a.r + (b.r - a.r) * t;
            img.at(x, y, 1) = a.g + (b.g - a.g) * t;
            img.at(x, y, 2) = a.b + (b.b - a.b) * t;
        }
    if (bg != Background::Clutter) return;
    const int n = 4 + static_cast<int>(clutter.below(5));
    for (int i = 0; i < n; ++i) {
        const Rgb c = random_muted(clutter);
        const int w = 3 + static_cast<int>(clutter.below(static_cast<std::uint64_t>(img.width / 4)));
        const int h = 3 + static_cast<int>(clutter.below(static_cast<std::uint64_t>(img.height / 4)));
        const int x0 = static_cast<int>(clutter.below(static_cast<std::uint64_t>(img.width)));
        const int y0 = static_cast<int>(clutter.below(static_cast<std::uint64_t>(img.height)));
        for (int y = y0; y < std::min(img.height, y0 + h); ++y)
            for (int x = x0; x < std::min(img.width, x0 + w); ++x) {
                img.at(x, y, 0) = c.r;
                img.at(x, y, 1) = c.g;
                img.at(x, y, 2) = c.b;
            }
    }
}

void draw_segment(Image& img, Vec a, Vec b, double thickness, Rgb col) {
    const double r = thickness / 2.0;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r - 1)));
    const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r + 1)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r - 1)));
    const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r + 1)));
    const float c[3] = {col.r, col.g, col.b};
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = segment_distance({static_cast<double>(x), static_cast<double>(y)}, a, b);
            const float cover = static_cast<float>(std::clamp(r + 0.5 - d, 0.0, 1.0));
            if (cover <= 0.0f) continue;
            for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) += cover * (c[ch] - img.at(x, y, ch));
        }
}

} // namespace

Scene generate_scene(const SkeletonSpec& spec, const FigureParams& params, int n_figures, Rng& rng) {
    validate_figure_params(params);
    if (n_figures < 1) throw Error(ErrorCode::InvalidConfig, "n_figures must be >= 1");
    if (spec.K != 17) throw Error(ErrorCode::InvalidSkeleton, "the stick-figure renderer draws the 17-keypoint body");

    Scene scene;
    scene.image = Image(params.image_size.w, params.image_size.h);
    const auto bg = params.backgrounds[rng.below(params.backgrounds.size())];
    paint_background(scene.image, bg, rng);

    const double W = params.image_size.w, Hh = params.image_size.h;
    std::vector<std::vector<Vec>> figures;
    for (int f = 0; f < n_figures; ++f) {
        const double H = rng.uniform(params.figure_height.first, params.figure_height.second);
        const Vec hip{rng.uniform(0.2 * W, 0.8 * W), rng.uniform(0.45 * Hh, 0.65 * Hh)};
        figures.push_back(pose_figure(params, hip, H, rng));
    }

    const double r = params.limb_thickness / 2.0;
    for (const auto& k : figures)
        for (std::size_t e = 0; e < spec.skeleton_edges.size(); ++e) {
            const auto [i, j] = spec.skeleton_edges[e];
            draw_segment(scene.image, k[static_cast<std::size_t>(i)], k[static_cast<std::size_t>(j)],
                         params.limb_thickness, params.palette[e % params.palette.size()]);
        }

    for (std::size_t f = 0; f < figures.size(); ++f) {
        PersonInstance inst;
        inst.keypoints.resize(17);
        double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
        for (int i = 0; i < 17; ++i) {
            const Vec p = figures[f][static_cast<std::size_t>(i)];
            Keypoint& kp = inst.keypoints[static_cast<std::size_t>(i)];
            if (p.x < 0.0 || p.y < 0.0 || p.x > W - 1.0 || p.y > Hh - 1.0) continue;
            kp = {p.x, p.y, 2};
            for (std::size_t g = f + 1; g < figures.size() && kp.v == 2; ++g)
                for (const auto& [a, b] : spec.skeleton_edges)
                    if (segment_distance(p, figures[g][static_cast<std::size_t>(a)],
                                         figures[g][static_cast<std::size_t>(b)]) <= r) {
                        kp.v = 1;
                        break;
                    }
            lo_x = std::min(lo_x, p.x);
            lo_y = std::min(lo_y, p.y);
            hi_x = std::max(hi_x, p.x);
            hi_y = std::max(hi_y, p.y);
        }
        if (inst.num_labeled() == 0) continue;
        const double w = std::max(1.0, (hi_x - lo_x) * 1.1), h = std::max(1.0, (hi_y - lo_y) * 1.1);
        inst.bbox = {(lo_x + hi_x - w) / 2.0, (lo_y + hi_y - h) / 2.0, w, h};
        inst.area = w * h;
        scene.people.push_back(std::move(inst));
    }
    return scene;
}

Image stylize(const Image& img, const StyleParams& style) {
    Image out = img;
    if (style.hue_degrees != 0.0) {
        const double c = std::cos(deg(style.hue_degrees)), s = std::sin(deg(style.hue_degrees));
        const double k = (1.0 - c) / 3.0, q = std::sqrt(1.0 / 3.0) * s;
        const double m[3][3] = {{c + k, k - q, k + q}, {k + q, c + k, k - q}, {k - q, k + q, c + k}};
        for (std::size_t i = 0; i < out.data.size(); i += 3) {
            const double rgb[3] = {out.data[i], out.data[i + 1], out.data[i + 2]};
            for (int r = 0; r < 3; ++r)
                out.data[i + r] =
                    static_cast<float>(std::clamp(m[r][0] * rgb[0] + m[r][1] * rgb[1] + m[r][2] * rgb[2], 0.0, 1.0));
        }
    }
    if (style.saturation != 1.0) {
        for (std::size_t i = 0; i < out.data.size(); i += 3) {
            const double gray = (out.data[i] + out.data[i + 1] + out.data[i + 2]) / 3.0;
            for (int r = 0; r < 3; ++r)
                out.data[i + r] =
                    static_cast<float>(std::clamp(gray + style.saturation * (out.data[i + r] - gray), 0.0, 1.0));
        }
    }
    out = gaussian_blur(out, style.blur_sigma);
    if (style.noise_amplitude > 0.0) {
        // Value noise on a 4-pixel lattice, bilinearly interpolated, reads as
        // coarse brush texture rather than per-pixel grain.
        constexpr int cell = 4;
        const int gw = out.width / cell + 2, gh = out.height / cell + 2;
        Rng rng(style.seed);
        std::vector<double> lattice(static_cast<std::size_t>(gw) * gh * 3);
        for (auto& v : lattice) v = rng.uniform(-1.0, 1.0);
        auto L = [&](int gx, int gy, int c) { return lattice[(static_cast<std::size_t>(gy) * gw + gx) * 3 + c]; };
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                const int gx = x / cell, gy = y / cell;
                const double fx = static_cast<double>(x % cell) / cell, fy = static_cast<double>(y % cell) / cell;
                for (int c = 0; c < 3; ++c) {
                    const double n = (1 - fx) * (1 - fy) * L(gx, gy, c) + fx * (1 - fy) * L(gx + 1, gy, c) +
                                     (1 - fx) * fy * L(gx, gy + 1, c) + fx * fy * L(gx + 1, gy + 1, c);
                    out.at(x, y, c) =
                        static_cast<float>(std::clamp(out.at(x, y, c) * (1.0 + style.noise_amplitude * n), 0.0, 1.0));
                }
            }
    }
    return out;
}

double mean_abs_difference(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw Error(ErrorCode::SizeMismatch, "image sizes differ");
    if (a.data.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::fabs(static_cast<double>(a.data[i]) - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

const SplitInfo& Manifest::split(const std::string& name) const {
    for (const auto& s : splits)
        if (s.name == name) return s;
    throw Error(ErrorCode::MissingField, "manifest has no split '" + name + "'");
}

namespace {

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create directory " + p.string() + ": " + ec.message());
}

std::string image_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d.ppm", index + 1);
    return buf;
}

AnnotationFile write_clean_split(const SkeletonSpec& spec, const FigureParams& params, int n, std::uint64_t seed,
                                 const fs::path& dir, std::vector<Image>* keep) {
    ensure_dir(dir / "images");
    AnnotationFile file;
    Category cat;
    cat.keypoints = spec.keypoint_names;
    for (const auto& [a, b] : spec.skeleton_edges) cat.skeleton.push_back({a + 1, b + 1});
    file.categories.push_back(cat);
    long long ann_id = 1;
    for (int i = 0; i < n; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        const int n_fig = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(params.max_figures)));
        Scene scene = generate_scene(spec, params, n_fig, rng);
        const long long image_id = i + 1;
        file.images.push_back({image_id, image_name(i), scene.image.width, scene.image.height});
        for (auto& p : scene.people) {
            p.image_id = image_id;
            p.id = ann_id++;
            file.annotations.push_back(p);
        }
        write_ppm((dir / "images" / image_name(i)).string(), scene.image);
        if (keep) keep->push_back(std::move(scene.image));
    }
    write_file((dir / "annotations.json").string(), write_annotations(file));
    return file;
}

} // namespace

Manifest build_dataset(const SkeletonSpec& spec, const FigureParams& params, const StyleParams& style, int n_train,
                       int n_val, std::uint64_t seed, const std::string& out_dir) {
    if (n_train < 1 || n_val < 1) throw Error(ErrorCode::InvalidConfig, "split sizes must be >= 1");
    validate_figure_params(params);
    const fs::path root(out_dir);
    ensure_dir(root);

    Manifest m;
    m.seed = seed;
    m.style = style;
    const std::uint64_t train_seed = derive_seed(seed, 1), val_seed = derive_seed(seed, 2);
    write_clean_split(spec, params, n_train, train_seed, root / "train", nullptr);
    std::vector<Image> val_images;
    write_clean_split(spec, params, n_val, val_seed, root / "val", &val_images);

    ensure_dir(root / "val_stylized" / "images");
    for (int i = 0; i < n_val; ++i) {
        StyleParams s = style;
        s.seed = derive_seed(style.seed, static_cast<std::uint64_t>(i));
        write_ppm((root / "val_stylized" / "images" / image_name(i)).string(),
                  stylize(val_images[static_cast<std::size_t>(i)], s));
    }

    m.splits = {{"train", "train/images", "train/annotations.json", n_train, train_seed},
                {"val", "val/images", "val/annotations.json", n_val, val_seed},
                {"val_stylized", "val_stylized/images", "val/annotations.json", n_val, style.seed}};
    m.path = (root / "manifest.json").string();
    write_file(m.path, manifest_to_json(m));
    return load_manifest(m.path);
}

std::string manifest_to_json(const Manifest& m) {
    nlohmann::ordered_json j;
    j["seed"] = m.seed;
    j["style"] = {{"hue_degrees", m.style.hue_degrees},
                  {"saturation", m.style.saturation},
                  {"blur_sigma", m.style.blur_sigma},
                  {"noise_amplitude", m.style.noise_amplitude},
                  {"seed", m.style.seed}};
    j["splits"] = nlohmann::ordered_json::array();
    for (const auto& s : m.splits)
        j["splits"].push_back({{"name", s.name},
                               {"image_dir", s.image_dir},
                               {"annotations", s.annotations},
                               {"n_images", s.n_images},
                               {"seed", s.seed}});
    return j.dump(2) + "\n";
}

Manifest load_manifest(const std::string& path) {
    const std::string text = read_file(path);
    Manifest m;
    m.path = path;
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
    try {
        const auto j = nlohmann::json::parse(text);
        m.seed = j.at("seed").get<std::uint64_t>();
        const auto& st = j.at("style");
        m.style = {st.at("hue_degrees").get<double>(), st.at("saturation").get<double>(),
                   st.at("blur_sigma").get<double>(), st.at("noise_amplitude").get<double>(),
                   st.at("seed").get<std::uint64_t>()};
        for (const auto& s : j.at("splits"))
            m.splits.push_back({s.at("name").get<std::string>(), resolve(s.at("image_dir").get<std::string>()),
                                resolve(s.at("annotations").get<std::string>()), s.at("n_images").get<int>(),
                                s.at("seed").get<std::uint64_t>()});
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, path + ": " + e.what(), e.byte);
    } catch (const nlohmann::json::out_of_range& e) {
        throw Error(ErrorCode::MissingField, path + ": " + e.what());
    } catch (const nlohmann::json::type_error& e) {
        throw Error(ErrorCode::InvalidFieldType, path + ": " + e.what());
    }
    return m;
}

LoadedSplit load_split(const SplitInfo& split, const SkeletonSpec& spec) {
    LoadedSplit out;
    out.annotations = parse_annotations(read_file(split.annotations), spec);
    std::map<long long, std::size_t> index;
    for (const auto& im : out.annotations.images) {
        index[im.id] = out.scenes.size();
        Scene s;
        s.image = read_ppm((fs::path(split.image_dir) / im.file_name).string());
        out.scenes.push_back(std::move(s));
    }
    for (const auto& a : out.annotations.annotations) {
        const auto it = index.find(a.image_id);
        if (it == index.end()) throw Error(ErrorCode::DanglingImageId, "annotation references a missing image");
        out.scenes[it->second].people.push_back(a);
    }
    return out;
}

} // namespace poseforge
