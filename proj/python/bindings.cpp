#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "fruitscan/error.hpp"
#include "fruitscan/pipeline.hpp"
#include "fruitscan/synthetic.hpp"

namespace py = pybind11;
using namespace fruitscan;

namespace {

using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ImageBuffer image_from_array(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) {
    throw py::value_error("expected an HxWx3 uint8 array");
  }
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  return ImageBuffer::rgb8(w, h, std::move(data));
}

py::array image_to_array(const ImageBuffer& img) {
  const std::vector<py::ssize_t> shape{img.height(), img.width(), img.channels()};
  if (is_integer_space(img.space())) {
    py::array_t<std::uint8_t> out(shape);
    std::memcpy(out.mutable_data(), img.bytes().data(), img.bytes().size());
    return out;
  }
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), img.reals().data(), img.reals().size() * sizeof(double));
  return out;
}

Mask mask_from_array(const py::array& a, int width, int height) {
  auto m = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(a);
  if (!m || m.ndim() != 2 || m.shape(0) != height || m.shape(1) != width) {
    throw py::value_error("mask must be an HxW array matching the image");
  }
  Mask mask = Mask::filled(width, height, false);
  for (py::ssize_t i = 0; i < m.size(); ++i) mask.data[i] = m.data()[i] != 0;
  return mask;
}

py::array mask_to_array(const Mask& mask) {
  py::array_t<bool> out({mask.height, mask.width});
  for (std::size_t i = 0; i < mask.data.size(); ++i) out.mutable_data()[i] = mask.data[i] != 0;
  return out;
}

SyntheticClass synthetic_class(const std::string& name) {
  for (SyntheticClass c : synthetic_classes()) {
    if (to_string(c) == name) return c;
  }
  throw py::value_error("unknown synthetic class '" + name + "'");
}

py::dict prediction_dict(const Prediction& p) {
  py::dict d;
  d["label"] = p.label;
  d["class_index"] = p.class_index;
  d["outcomes"] = p.outcomes;
  d["distances"] = p.distances;
  d["tie"] = p.tie;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fruit disease recognition: segmentation, color/texture descriptors, one-vs-one SVMs";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result(
      [&]() { return py::object(py::exception<Error>(m, "Error", PyExc_RuntimeError)); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = error_type.get_stored();
      py::object instance = type(e.what());
      instance.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(type.ptr(), instance.ptr());
    }
  });

  py::enum_<ClbpThreshold>(m, "ClbpThreshold")
      .value("MAGNITUDE_MEAN", ClbpThreshold::MagnitudeMean)
      .value("GRAY_MEAN", ClbpThreshold::GrayMean);

  py::class_<DescriptorConfig>(m, "DescriptorConfig")
      .def(py::init<>())
      .def_readwrite("gch_levels", &DescriptorConfig::gch_levels)
      .def_readwrite("ccv_levels", &DescriptorConfig::ccv_levels)
      .def_readwrite("ccv_blur_radius", &DescriptorConfig::ccv_blur_radius)
      .def_readwrite("ccv_tau", &DescriptorConfig::ccv_tau)
      .def_readwrite("lbp_neighbors", &DescriptorConfig::lbp_neighbors)
      .def_readwrite("lbp_radius", &DescriptorConfig::lbp_radius)
      .def_readwrite("ltp_theta", &DescriptorConfig::ltp_theta)
      .def_readwrite("clbp_threshold", &DescriptorConfig::clbp_threshold)
      .def_readwrite("cdh_orientation_bins", &DescriptorConfig::cdh_orientation_bins)
      .def_readwrite("cdh_distance", &DescriptorConfig::cdh_distance);

  py::class_<KMeansConfig>(m, "KMeansConfig")
      .def(py::init<>())
      .def_readwrite("k", &KMeansConfig::k)
      .def_readwrite("max_iterations", &KMeansConfig::max_iterations)
      .def_readwrite("tolerance", &KMeansConfig::tolerance)
      .def_readwrite("seed", &KMeansConfig::seed)
      .def_readwrite("restarts", &KMeansConfig::restarts);

  m.def("load_image", [](const std::filesystem::path& p) { return image_to_array(load_image(p)); },
        py::arg("path"), "PNG or JPEG as an HxWx3 uint8 array.");
  m.def("save_png", [](const ByteArray& a, const std::filesystem::path& p) { save_png(image_from_array(a), p); },
        py::arg("image"), py::arg("path"));
  m.def("rgb_to_lab", [](const ByteArray& a) { return image_to_array(rgb_to_lab(image_from_array(a))); },
        py::arg("image"));

  m.def(
      "segment",
      [](const ByteArray& a, const KMeansConfig& cfg, const std::string& select) {
        const ImageBuffer img = image_from_array(a);
        const SegmentationResult seg =
            select_disease_cluster(segment_image(img, cfg), parse_selection(select));
        py::array_t<std::uint32_t> labels({seg.height, seg.width});
        std::memcpy(labels.mutable_data(), seg.labels.data(), seg.labels.size() * sizeof(std::uint32_t));
        py::list stats;
        for (const auto& s : seg.cluster_stats) {
          py::dict d;
          d["pixel_count"] = s.pixel_count;
          d["mean_l"] = s.mean_l;
          d["mean_a"] = s.mean_a;
          d["mean_b"] = s.mean_b;
          stats.append(d);
        }
        py::dict out;
        out["labels"] = labels;
        out["mask"] = mask_to_array(seg.mask);
        out["selected"] = seg.selected_cluster;
        out["clusters"] = stats;
        return out;
      },
      py::arg("image"), py::arg("config") = KMeansConfig{}, py::arg("select") = "darkest",
      "k-means on a*b*, then region selection ('darkest' or 'manual:<i>').");

  m.def(
      "extract",
      [](const ByteArray& a, const std::string& features, const py::object& mask,
         const DescriptorConfig& cfg) {
        const ImageBuffer img = image_from_array(a);
        const Mask region = mask.is_none() ? Mask::filled(img.width(), img.height(), true)
                                           : mask_from_array(mask.cast<py::array>(), img.width(), img.height());
        const auto names = parse_feature_list(features);
        const FeatureVector fv = extract_fused(names, img, region, cfg);
        return py::array_t<double>(static_cast<py::ssize_t>(fv.values.size()), fv.values.data());
      },
      py::arg("image"), py::arg("features") = "cdh,seh,clbp", py::arg("mask") = py::none(),
      py::arg("config") = DescriptorConfig{},
      "Normalized descriptors of the masked region, fused in the listed order.");

  m.def("descriptor_names", &descriptor_names);
  m.def("descriptor_length", &descriptor_length, py::arg("name"), py::arg("config") = DescriptorConfig{});

  m.def(
      "build_id_matrix",
      [](std::size_t n) {
        const IdMatrix id = build_id_matrix(n);
        py::array_t<int> out({id.rows(), id.cols()});
        for (std::size_t r = 0; r < id.rows(); ++r) {
          for (std::size_t c = 0; c < id.cols(); ++c) out.mutable_at(r, c) = id.at(r, c);
        }
        return out;
      },
      py::arg("n_classes"));
  m.def(
      "decode",
      [](const std::vector<int>& outcomes, std::size_t n_classes) {
        const Decoded d = decode(outcomes, build_id_matrix(n_classes));
        return py::make_tuple(d.class_index, d.distances, d.tie);
      },
      py::arg("outcomes"), py::arg("n_classes"), "Returns (class_index, distances, tie).");

  m.def(
      "synthesize_apple",
      [](const std::string& cls, std::uint64_t seed, int size) {
        const SyntheticSample s = synthesize_apple(synthetic_class(cls), seed, size);
        return py::make_tuple(image_to_array(s.image), mask_to_array(s.fruit), mask_to_array(s.defect));
      },
      py::arg("cls"), py::arg("seed"), py::arg("size") = 96, "Returns (image, fruit_mask, defect_mask).");
  m.def(
      "write_synthetic_corpus",
      [](const std::filesystem::path& dir, int per_class, int size, std::uint64_t seed) {
        return write_synthetic_corpus(dir, {per_class, size, seed});
      },
      py::arg("directory"), py::arg("per_class") = 60, py::arg("size") = 96, py::arg("seed") = 1);

  m.def(
      "train",
      [](const std::filesystem::path& manifest_path, std::size_t train_per_class, std::uint64_t seed,
         const std::string& features, const std::filesystem::path& model_out) {
        const DatasetManifest manifest = load_manifest(manifest_path);
        PipelineConfig config;
        config.features = parse_feature_list(features);
        const SplitSpec spec{train_per_class, seed};
        TrainingOutcome outcome;
        {
          py::gil_scoped_release release;
          outcome = run_training(manifest, split_dataset(manifest, spec), spec, config);
        }
        save_model(outcome.model, model_out);
        py::dict d;
        d["classes"] = outcome.model.classes;
        d["learners"] = outcome.model.learners.size();
        d["dimension"] = outcome.model.dimension();
        d["skipped"] = outcome.skipped.size();
        return d;
      },
      py::arg("manifest"), py::arg("train_per_class"), py::arg("seed") = 0,
      py::arg("features") = "cdh,seh,clbp", py::arg("model_out"));

  m.def(
      "evaluate",
      [](const std::filesystem::path& model_path, const std::filesystem::path& manifest_path,
         std::optional<std::uint64_t> split_seed, const std::string& format) {
        const MulticlassModel model = load_model(model_path);
        const DatasetManifest manifest = load_manifest(manifest_path);
        const SplitSpec spec{model.extraction.train_per_class,
                             split_seed.value_or(model.extraction.split_seed)};
        const ReportFormat fmt = parse_report_format(format);
        EvaluationReport report;
        {
          py::gil_scoped_release release;
          report = evaluate(model, split_dataset(manifest, spec).test);
        }
        report.split_seed = spec.seed;
        return emit_report(report, fmt);
      },
      py::arg("model"), py::arg("manifest"), py::arg("split_seed") = py::none(),
      py::arg("format") = "json", "Serialized report of the model on its held-out split.");

  m.def(
      "classify",
      [](const std::filesystem::path& model_path, const std::filesystem::path& image_path,
         const std::optional<std::string>& select, const std::optional<std::filesystem::path>& out_mask) {
        std::optional<SelectionStrategy> strategy;
        if (select) strategy = parse_selection(*select);
        return prediction_dict(classify_one(model_path, image_path, strategy, out_mask).prediction);
      },
      py::arg("model"), py::arg("image"), py::arg("select") = py::none(), py::arg("out_mask") = py::none());
}
