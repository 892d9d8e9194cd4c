#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fruitscan/classifier.hpp"
#include "fruitscan/error.hpp"
#include "serialization.hpp"

namespace fruitscan {

// File layout:
//   fruitscan-model <format_version>
//   fnv1a64 <16 hex digits of the payload hash>
//   <JSON payload; reals as shortest round-trip decimal text>
namespace {

constexpr std::string_view kMagic = "fruitscan-model";

using nlohmann::json;

json block_to_json(const FeatureBlock& b) {
  return {{"name", b.name}, {"offset", b.offset}, {"length", b.length}, {"degenerate", b.degenerate}};
}

FeatureBlock block_from_json(const json& j) {
  return {j.at("name").get<std::string>(), j.at("offset").get<std::size_t>(),
          j.at("length").get<std::size_t>(), j.at("degenerate").get<bool>()};
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  return hash;
}

json descriptor_config_to_json(const DescriptorConfig& c) {
  return {
      {"gch_levels", c.gch_levels},
      {"ccv_levels", c.ccv_levels},
      {"ccv_blur_radius", c.ccv_blur_radius},
      {"ccv_tau", c.ccv_tau},
      {"lbp_neighbors", c.lbp_neighbors},
      {"lbp_radius", c.lbp_radius},
      {"ltp_theta", c.ltp_theta},
      {"clbp_threshold",
       c.clbp_threshold == ClbpThreshold::MagnitudeMean ? "magnitude-mean" : "gray-mean"},
      {"cdh_color_bins", c.cdh_color_bins},
      {"cdh_orientation_bins", c.cdh_orientation_bins},
      {"cdh_distance", c.cdh_distance},
      {"seh_bins", c.seh_bins},
  };
}

DescriptorConfig descriptor_config_from_json(const json& j) {
  DescriptorConfig c;
  c.gch_levels = j.at("gch_levels").get<int>();
  c.ccv_levels = j.at("ccv_levels").get<int>();
  c.ccv_blur_radius = j.at("ccv_blur_radius").get<int>();
  c.ccv_tau = j.at("ccv_tau").get<double>();
  c.lbp_neighbors = j.at("lbp_neighbors").get<int>();
  c.lbp_radius = j.at("lbp_radius").get<double>();
  c.ltp_theta = j.at("ltp_theta").get<double>();
  const auto threshold = j.at("clbp_threshold").get<std::string>();
  require(threshold == "magnitude-mean" || threshold == "gray-mean",
          "unknown clbp_threshold '" + threshold + "'");
  c.clbp_threshold =
      threshold == "magnitude-mean" ? ClbpThreshold::MagnitudeMean : ClbpThreshold::GrayMean;
  c.cdh_color_bins = j.at("cdh_color_bins").get<int>();
  c.cdh_orientation_bins = j.at("cdh_orientation_bins").get<int>();
  c.cdh_distance = j.at("cdh_distance").get<int>();
  c.seh_bins = j.at("seh_bins").get<int>();
  return c;
}

json kmeans_config_to_json(const KMeansConfig& c) {
  return {{"k", c.k},
          {"max_iterations", c.max_iterations},
          {"tolerance", c.tolerance},
          {"seed", c.seed},
          {"restarts", c.restarts}};
}

KMeansConfig kmeans_config_from_json(const json& j) {
  KMeansConfig c;
  c.k = j.at("k").get<int>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.tolerance = j.at("tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.restarts = j.at("restarts").get<int>();
  return c;
}

json svm_config_to_json(const SvmConfig& c) {
  return {{"c", c.c},
          {"epochs", c.epochs},
          {"eta0", c.eta0},
          {"seed", c.seed},
          {"tolerance", c.tolerance}};
}

SvmConfig svm_config_from_json(const json& j) {
  SvmConfig c;
  c.c = j.at("c").get<double>();
  c.epochs = j.at("epochs").get<int>();
  c.eta0 = j.at("eta0").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.tolerance = j.at("tolerance").get<double>();
  return c;
}

std::string serialize_model(const MulticlassModel& model) {
  json payload;
  payload["float_encoding"] = "decimal";
  payload["classes"] = model.classes;

  json id = json::array();
  for (std::size_t r = 0; r < model.id_matrix.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < model.id_matrix.cols(); ++c) row.push_back(model.id_matrix.at(r, c));
    id.push_back(std::move(row));
  }
  payload["id_matrix"] = std::move(id);

  json learners = json::array();
  for (const auto& l : model.learners) {
    learners.push_back({{"positive_class", l.positive_class},
                        {"negative_class", l.negative_class},
                        {"positive_samples", l.positive_samples},
                        {"negative_samples", l.negative_samples},
                        {"bias", l.bias},
                        {"weights", l.weights}});
  }
  payload["learners"] = std::move(learners);

  json layout = json::array();
  for (const auto& b : model.layout) layout.push_back(block_to_json(b));
  payload["layout"] = std::move(layout);
  payload["scaling"] = {{"offset", model.scaling.offset}, {"scale", model.scaling.scale}};
  payload["svm"] = svm_config_to_json(model.svm);

  const auto& e = model.extraction;
  payload["extraction"] = {{"features", e.features},
                           {"descriptor", descriptor_config_to_json(e.descriptor)},
                           {"kmeans", kmeans_config_to_json(e.kmeans)},
                           {"selection", e.selection},
                           {"train_per_class", e.train_per_class},
                           {"split_seed", e.split_seed}};

  const std::string body = payload.dump(1);
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  return std::string(kMagic) + " " + std::to_string(model.format_version) + "\nfnv1a64 " +
         digest + "\n" + body + "\n";
}

MulticlassModel deserialize_model(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  std::string version_text;
  std::string header;
  if (!std::getline(in, header)) fail(ErrorKind::Integrity, "model file is empty");
  {
    std::istringstream h(header);
    h >> magic >> version_text;
  }
  if (magic != kMagic) fail(ErrorKind::Integrity, "not a fruitscan model file");
  int version = 0;
  try {
    std::size_t used = 0;
    version = std::stoi(version_text, &used);
    if (used != version_text.size()) throw std::invalid_argument(version_text);
  } catch (const std::exception&) {
    fail(ErrorKind::Integrity, "model header has a malformed version '" + version_text + "'");
  }
  if (version != MulticlassModel::kFormatVersion) {
    fail(ErrorKind::Version, "unsupported model format version " + std::to_string(version) +
                                 " (this build reads version " +
                                 std::to_string(MulticlassModel::kFormatVersion) + ")");
  }

  std::string checksum_line;
  if (!std::getline(in, checksum_line) || !checksum_line.starts_with("fnv1a64 ")) {
    fail(ErrorKind::Integrity, "model file is missing its checksum line");
  }
  const std::string expected = checksum_line.substr(8);
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!body.empty() && body.back() == '\n') body.pop_back();
  char digest[17];
  std::snprintf(digest, sizeof digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  if (expected != digest) fail(ErrorKind::Integrity, "model checksum mismatch (file corrupted or truncated)");

  try {
    const json payload = json::parse(body);
    MulticlassModel model;
    model.format_version = version;
    model.classes = payload.at("classes").get<std::vector<std::string>>();
    model.id_matrix = IdMatrix::build(model.classes.size());
    const auto& id = payload.at("id_matrix");
    require(id.size() == model.id_matrix.rows(), "id matrix row count mismatch");
    for (std::size_t r = 0; r < id.size(); ++r) {
      require(id[r].size() == model.id_matrix.cols(), "id matrix column count mismatch");
      for (std::size_t c = 0; c < id[r].size(); ++c) {
        require(id[r][c].get<int>() == model.id_matrix.at(r, c), "id matrix entry mismatch");
      }
    }
    for (const auto& l : payload.at("learners")) {
      BinarySvm svm;
      svm.positive_class = l.at("positive_class").get<std::string>();
      svm.negative_class = l.at("negative_class").get<std::string>();
      svm.positive_samples = l.at("positive_samples").get<std::size_t>();
      svm.negative_samples = l.at("negative_samples").get<std::size_t>();
      svm.bias = l.at("bias").get<double>();
      svm.weights = l.at("weights").get<std::vector<double>>();
      model.learners.push_back(std::move(svm));
    }
    require(model.learners.size() == model.id_matrix.cols(), "learner count mismatch");
    for (const auto& b : payload.at("layout")) model.layout.push_back(block_from_json(b));
    model.scaling.offset = payload.at("scaling").at("offset").get<std::vector<double>>();
    model.scaling.scale = payload.at("scaling").at("scale").get<std::vector<double>>();
    model.svm = svm_config_from_json(payload.at("svm"));
    const auto& e = payload.at("extraction");
    model.extraction.features = e.at("features").get<std::vector<std::string>>();
    model.extraction.descriptor = descriptor_config_from_json(e.at("descriptor"));
    model.extraction.kmeans = kmeans_config_from_json(e.at("kmeans"));
    model.extraction.selection = e.at("selection").get<std::string>();
    model.extraction.train_per_class = e.at("train_per_class").get<std::size_t>();
    model.extraction.split_seed = e.at("split_seed").get<std::uint64_t>();
    return model;
  } catch (const json::exception& ex) {
    fail(ErrorKind::Integrity, std::string("malformed model payload: ") + ex.what());
  } catch (const Error& ex) {
    fail(ErrorKind::Integrity, std::string("inconsistent model payload: ") + ex.what());
  }
}

void save_model(const MulticlassModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write model file: " + path.string());
  out << serialize_model(model);
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

MulticlassModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open model file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(text);
}

}  // namespace fruitscan
