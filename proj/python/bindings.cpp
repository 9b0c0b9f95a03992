#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "poseforge/config.hpp"
#include "poseforge/oks_reference.hpp"
#include "poseforge/verify.hpp"

namespace py = pybind11;
using namespace poseforge;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array heatmap_array(const Heatmap& hm) {
    Array a({hm.K, hm.height(), hm.width()});
    std::copy(hm.data.begin(), hm.data.end(), a.mutable_data());
    return a;
}

Heatmap heatmap_from_array(const Array& a, const HeatmapConfig& cfg) {
    if (a.ndim() != 3 || a.shape(1) != cfg.heatmap_size.h || a.shape(2) != cfg.heatmap_size.w)
        throw Error(ErrorCode::ShapeMismatch, "heatmap array must be (K, H', W') matching the config");
    Heatmap hm(static_cast<int>(a.shape(0)), cfg);
    std::copy(a.data(), a.data() + a.size(), hm.data.begin());
    return hm;
}

py::array_t<float> image_array(const Image& img) {
    py::array_t<float> a({img.height, img.width, 3});
    std::copy(img.data.begin(), img.data.end(), a.mutable_data());
    return a;
}

Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw Error(ErrorCode::ShapeMismatch, "image array must be (H, W, 3)");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), img.data.begin());
    return img;
}

Array tensor_array(const nn::Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
    Array a(shape);
    std::copy(t.data.begin(), t.data.end(), a.mutable_data());
    return a;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "poseforge native core";

    static py::exception<Error> error(m, "PoseforgeError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::handle(error.ptr())(e.what());
            exc.attr("code") = to_string(e.code());
            PyErr_SetObject(error.ptr(), exc.ptr());
        }
    });

    py::class_<SkeletonSpec>(m, "SkeletonSpec")
        .def_readonly("name", &SkeletonSpec::name)
        .def_readonly("K", &SkeletonSpec::K)
        .def_readonly("keypoint_names", &SkeletonSpec::keypoint_names)
        .def_readonly("flip_pairs", &SkeletonSpec::flip_pairs)
        .def_readonly("oks_k", &SkeletonSpec::oks_k)
        .def_readonly("skeleton_edges", &SkeletonSpec::skeleton_edges)
        .def("to_json", &skeleton_to_json);
    m.def("coco17_skeleton", &coco17_skeleton);
    m.def("skeleton_from_json", &skeleton_from_json, py::arg("text"));
    m.def("flip_index_map", &flip_index_map, py::arg("spec"));

    py::class_<Keypoint>(m, "Keypoint")
        .def(py::init<double, double, int>(), py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("v") = 0)
        .def_readwrite("x", &Keypoint::x)
        .def_readwrite("y", &Keypoint::y)
        .def_readwrite("v", &Keypoint::v)
        .def("__eq__", [](const Keypoint& a, const Keypoint& b) { return a == b; })
        .def("__repr__", [](const Keypoint& k) {
            return "Keypoint(" + std::to_string(k.x) + ", " + std::to_string(k.y) + ", " + std::to_string(k.v) + ")";
        });

    py::class_<BBox>(m, "BBox")
        .def(py::init<double, double, double, double>(), py::arg("x") = 0.0, py::arg("y") = 0.0, py::arg("w") = 1.0,
             py::arg("h") = 1.0)
        .def_readwrite("x", &BBox::x)
        .def_readwrite("y", &BBox::y)
        .def_readwrite("w", &BBox::w)
        .def_readwrite("h", &BBox::h);

    py::class_<PersonInstance>(m, "PersonInstance")
        .def(py::init<>())
        .def_readwrite("keypoints", &PersonInstance::keypoints)
        .def_readwrite("bbox", &PersonInstance::bbox)
        .def_readwrite("area", &PersonInstance::area)
        .def_readwrite("score", &PersonInstance::score)
        .def_readwrite("image_id", &PersonInstance::image_id)
        .def_readwrite("id", &PersonInstance::id)
        .def_readwrite("iscrowd", &PersonInstance::iscrowd)
        .def("num_labeled", &PersonInstance::num_labeled)
        .def("__eq__", [](const PersonInstance& a, const PersonInstance& b) { return a == b; });
    m.def("validate_instance", &validate_instance, py::arg("inst"), py::arg("spec"));

    py::class_<ImageRecord>(m, "ImageRecord")
        .def_readonly("id", &ImageRecord::id)
        .def_readonly("file_name", &ImageRecord::file_name)
        .def_readonly("width", &ImageRecord::width)
        .def_readonly("height", &ImageRecord::height);
    py::class_<AnnotationFile>(m, "AnnotationFile")
        .def_readonly("images", &AnnotationFile::images)
        .def_readonly("annotations", &AnnotationFile::annotations)
        .def("__eq__", [](const AnnotationFile& a, const AnnotationFile& b) { return a == b; });
    py::class_<ResultFile>(m, "ResultFile");
    m.def("parse_annotations", [](const std::string& s, const SkeletonSpec& spec) { return parse_annotations(s, spec); },
          py::arg("text"), py::arg("spec"));
    m.def("write_annotations", &write_annotations, py::arg("file"));
    m.def("parse_results", [](const std::string& s, const SkeletonSpec& spec) { return parse_results(s, spec); },
          py::arg("text"), py::arg("spec"));
    m.def("write_results", &write_results, py::arg("results"));

    py::class_<HeatmapConfig>(m, "HeatmapConfig")
        .def_property_readonly("input_size", [](const HeatmapConfig& c) { return std::make_pair(c.input_size.w, c.input_size.h); })
        .def_property_readonly("heatmap_size",
                               [](const HeatmapConfig& c) { return std::make_pair(c.heatmap_size.w, c.heatmap_size.h); })
        .def_readonly("sigma", &HeatmapConfig::sigma)
        .def_readonly("supervise_occluded", &HeatmapConfig::supervise_occluded);
    m.def(
        "make_heatmap_config",
        [](std::pair<int, int> input_size, double sigma, bool occluded) {
            return make_heatmap_config({input_size.first, input_size.second}, sigma, occluded);
        },
        py::arg("input_size"), py::arg("sigma") = 2.0, py::arg("supervise_occluded") = true,
        "input_size is (width, height); the heatmap is a quarter of it.");

    m.def(
        "encode",
        [](const PersonInstance& inst, const HeatmapConfig& cfg, const SkeletonSpec& spec) {
            return heatmap_array(encode(inst, cfg, spec));
        },
        py::arg("inst"), py::arg("cfg"), py::arg("spec"), "Keypoints in input pixels -> (K, H', W') heatmaps.");
    m.def(
        "decode",
        [](const Array& a, const HeatmapConfig& cfg, bool refine) {
            std::vector<std::tuple<double, double, double>> out;
            for (const auto& k : decode(heatmap_from_array(a, cfg), {refine})) out.emplace_back(k.x, k.y, k.confidence);
            return out;
        },
        py::arg("heatmaps"), py::arg("cfg"), py::arg("refine") = true,
        "(K, H', W') heatmaps -> [(x, y, confidence)] in input pixels.");
    m.def(
        "flip_heatmap",
        [](const Array& a, const HeatmapConfig& cfg, const SkeletonSpec& spec) {
            return heatmap_array(flip_heatmap(heatmap_from_array(a, cfg), spec));
        },
        py::arg("heatmaps"), py::arg("cfg"), py::arg("spec"));

    py::class_<OksParams>(m, "OksParams")
        .def_static("from_skeleton", &OksParams::from_skeleton)
        .def_readwrite("k", &OksParams::k)
        .def_readwrite("thresholds", &OksParams::thresholds)
        .def_readwrite("max_dets", &OksParams::max_dets);
    m.def("oks", &oks, py::arg("gt"), py::arg("pred"), py::arg("params"));

    py::class_<EvalReport>(m, "EvalReport")
        .def_readonly("ap", &EvalReport::ap)
        .def_readonly("ar", &EvalReport::ar)
        .def_readonly("thresholds", &EvalReport::thresholds)
        .def_readonly("ap_per_threshold", &EvalReport::ap_per_threshold)
        .def_readonly("ar_per_threshold", &EvalReport::ar_per_threshold)
        .def_readonly("num_gt", &EvalReport::num_gt)
        .def_readonly("num_pred", &EvalReport::num_pred)
        .def("ap_at", &EvalReport::ap_at)
        .def("to_json", &report_to_json);
    m.def("evaluate",
          py::overload_cast<const AnnotationFile&, const std::vector<PersonInstance>&, const OksParams&>(&evaluate),
          py::arg("gt_file"), py::arg("preds"), py::arg("params"));
    m.def("evaluate", py::overload_cast<const AnnotationFile&, const ResultFile&, const OksParams&>(&evaluate),
          py::arg("gt_file"), py::arg("results"), py::arg("params"));
    m.def("evaluate_bruteforce", &evaluate_bruteforce, py::arg("gt_file"), py::arg("preds"), py::arg("params"));

    py::class_<CodecReport>(m, "CodecReport")
        .def_readonly("n", &CodecReport::n)
        .def_readonly("max_error", &CodecReport::max_error)
        .def_readonly("mean_error", &CodecReport::mean_error);
    m.def("codec_roundtrip", [](int n, std::uint64_t seed, const std::vector<double>& s) { return codec_roundtrip(n, seed, s); },
          py::arg("n") = 1000, py::arg("seed") = 0, py::arg("sigmas") = std::vector<double>{1.5, 2.0, 3.0});
    m.def("flip_consistency",
          [](int n, std::uint64_t seed, const SkeletonSpec& spec) { return flip_consistency(n, seed, spec); },
          py::arg("n") = 1000, py::arg("seed") = 0, py::arg("spec") = coco17_skeleton());
    m.def("gradcheck_tiny", [](std::uint64_t seed, bool corrupt) { return gradcheck_tiny(seed, corrupt).max_rel_error; },
          py::arg("seed") = 0, py::arg("corrupt") = false, "Maximum relative gradient error on the tiny network.");

    py::class_<StyleParams>(m, "StyleParams")
        .def(py::init<double, double, double, double, std::uint64_t>(), py::arg("hue_degrees") = 0.0,
             py::arg("saturation") = 1.0, py::arg("blur_sigma") = 0.0, py::arg("noise_amplitude") = 0.0,
             py::arg("seed") = 0)
        .def_static("neutral", &StyleParams::neutral)
        .def_static("monet_like", &StyleParams::monet_like, py::arg("seed") = 0);
    m.def(
        "generate_scene",
        [](std::uint64_t seed, int n_figures, std::pair<int, int> size) {
            FigureParams fp;
            fp.image_size = {size.first, size.second};
            const double h = 0.75 * std::min(size.first, size.second);
            fp.figure_height = {0.6 * h, h};
            Rng rng(seed);
            const Scene s = generate_scene(coco17_skeleton(), fp, n_figures, rng);
            return py::make_tuple(image_array(s.image), s.people);
        },
        py::arg("seed"), py::arg("n_figures") = 1, py::arg("size") = std::make_pair(192, 192),
        "Stick-figure scene: (image (H, W, 3) float32, [PersonInstance]).");
    m.def(
        "stylize", [](const py::array_t<float, py::array::c_style | py::array::forcecast>& img, const StyleParams& s) {
            return image_array(stylize(image_from_array(img), s));
        },
        py::arg("image"), py::arg("style"));

    py::class_<MicroUNet>(m, "MicroUNet")
        .def_static(
            "load", [](const std::string& path) { return MicroUNet::load_checkpoint(read_file(path)); }, py::arg("path"))
        .def_property_readonly("input_size",
                               [](const MicroUNet& n) { return std::make_pair(n.config().input_size.w, n.config().input_size.h); })
        .def(
            "predict_pose",
            [](MicroUNet& n, const py::array_t<float, py::array::c_style | py::array::forcecast>& img) {
                return tensor_array(n.predict(image_from_array(img), Task::Pose));
            },
            py::arg("image"), "Single-step heatmap prediction for an (H, W, 3) crop at the network input size.");
}
