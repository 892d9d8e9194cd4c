#include "fruitscan/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "fruitscan/error.hpp"
#include "random.hpp"

namespace fruitscan {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r\n") - first + 1);
}

// Re-raise a stage error with the offending image attached.
[[noreturn]] void rethrow_for(const std::filesystem::path& path, const Error& e) {
  throw Error(e.kind(), path.string() + ": " + e.what());
}

// Failures that describe the image content rather than a broken file or a
// bad configuration. Those images are skipped and counted.
bool is_skippable(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::SelectionFailed:
    case ErrorKind::EmptyRegion:
    case ErrorKind::Infeasible:
    case ErrorKind::Numeric:
      return true;
    default:
      return false;
  }
}

}  // namespace

void warn_to_stderr(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::size_t DatasetManifest::class_index(const std::string& label) const {
  const auto it = std::find(classes.begin(), classes.end(), label);
  if (it == classes.end()) fail(ErrorKind::Precondition, "unknown class label '" + label + "'");
  return static_cast<std::size_t>(it - classes.begin());
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name) {
  const auto where = [&](std::size_t line) {
    return source_name + ":" + std::to_string(line) + ": ";
  };
  std::string line;
  std::size_t line_no = 0;
  std::string header;
  while (std::getline(in, line)) {
    ++line_no;
    header = trim(line);
    if (!header.empty()) break;
  }
  if (header != "path,label") {
    fail(ErrorKind::Parse, where(line_no) + "expected header 'path,label'");
  }

  DatasetManifest manifest;
  std::unordered_map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find(',');
    if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos) {
      fail(ErrorKind::Parse, where(line_no) + "expected exactly two fields 'path,label'");
    }
    const std::string path_text = trim(row.substr(0, comma));
    const std::string label = trim(row.substr(comma + 1));
    if (path_text.empty() || label.empty()) {
      fail(ErrorKind::Parse, where(line_no) + "empty path or label");
    }
    std::filesystem::path path(path_text);
    if (path.is_relative()) path = base_dir / path;
    path = path.lexically_normal();
    const auto [it, inserted] = seen.emplace(path.string(), line_no);
    if (!inserted) {
      fail(ErrorKind::Parse, where(line_no) + "duplicate path '" + path_text +
                                 "' (first listed on line " + std::to_string(it->second) + ")");
    }
    if (std::find(manifest.classes.begin(), manifest.classes.end(), label) ==
        manifest.classes.end()) {
      manifest.classes.push_back(label);
    }
    manifest.entries.push_back({std::move(path), label});
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open manifest: " + path.string());
  return parse_manifest(in, path.parent_path(), path.string());
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write manifest: " + path.string());
  const auto base = path.parent_path();
  out << "path,label\n";
  for (const auto& e : manifest.entries) {
    const auto rel = e.path.lexically_relative(base);
    out << (rel.empty() ? e.path : rel).generic_string() << ',' << e.label << '\n';
  }
}

DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitSpec& spec) {
  require(spec.train_per_class >= 1, "split: train_per_class must be >= 1");
  std::vector<std::vector<std::size_t>> members(manifest.classes.size());
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    members[manifest.class_index(manifest.entries[i].label)].push_back(i);
  }
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (spec.train_per_class >= members[c].size()) {
      fail(ErrorKind::InfeasibleSplit,
           "cannot take " + std::to_string(spec.train_per_class) + " training images from class '" +
               manifest.classes[c] + "' with only " + std::to_string(members[c].size()) +
               " images (at least one must remain for testing)");
    }
  }

  detail::Rng rng(spec.seed);
  std::vector<std::uint8_t> is_train(manifest.entries.size(), 0);
  for (auto& indices : members) {
    rng.shuffle(indices);
    for (std::size_t k = 0; k < spec.train_per_class; ++k) is_train[indices[k]] = 1;
  }
  DatasetSplit split;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    (is_train[i] ? split.train : split.test).push_back(manifest.entries[i]);
  }
  return split;
}

ImageAnalysis analyze_image(const ImageBuffer& rgb, std::span<const std::string> features,
                            const DescriptorConfig& descriptor, const KMeansConfig& kmeans,
                            const SelectionStrategy& selection) {
  ImageAnalysis out;
  out.segmentation = select_disease_cluster(segment_image(rgb, kmeans), selection);
  out.features = extract_fused(features, rgb, out.segmentation.mask, descriptor);
  return out;
}

FeatureVector DescriptorTable::fused(std::size_t i, std::span<const std::string> names) const {
  require(ok(i), "descriptor table row " + std::to_string(i) + " failed extraction");
  std::vector<FeatureVector> parts;
  for (const auto& name : names) {
    const auto it = descriptors[i].find(name);
    require(it != descriptors[i].end(), "descriptor '" + name + "' was not computed");
    parts.push_back(it->second);
  }
  return fuse(parts);
}

DescriptorTable compute_descriptors(std::span<const ManifestEntry> entries,
                                    std::span<const std::string> names,
                                    const PipelineConfig& config, const WarningSink& warn) {
  require(!names.empty(), "no descriptors requested");
  config.descriptor.validate();
  DescriptorTable table;
  table.entries.assign(entries.begin(), entries.end());
  table.descriptors.resize(entries.size());
  table.failures.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    try {
      const ImageBuffer rgb = load_image(entries[i].path);
      const SegmentationResult seg =
          select_disease_cluster(segment_image(rgb, config.kmeans), config.selection);
      for (const auto& name : names) {
        table.descriptors[i][name] = extract(name, rgb, seg.mask, config.descriptor);
      }
    } catch (const Error& e) {
      if (!is_skippable(e.kind())) rethrow_for(entries[i].path, e);
      table.descriptors[i].clear();
      table.failures[i] = e.what();
      if (warn) warn("skipping " + entries[i].path.string() + ": " + e.what());
    }
  }
  return table;
}

TrainingOutcome train_from_table(const DescriptorTable& table, std::span<const std::size_t> rows,
                                 const std::vector<std::string>& classes, const SplitSpec& spec,
                                 const PipelineConfig& config) {
  require(!config.features.empty(), "feature list is empty");
  TrainingOutcome outcome;
  std::vector<FeatureVector> samples;
  std::vector<std::size_t> labels;
  for (std::size_t row : rows) {
    const auto& entry = table.entries[row];
    if (!table.ok(row)) {
      outcome.skipped.push_back({entry.path, table.failures[row]});
      continue;
    }
    const auto it = std::find(classes.begin(), classes.end(), entry.label);
    require(it != classes.end(), "unknown class label '" + entry.label + "'");
    samples.push_back(table.fused(row, config.features));
    labels.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  outcome.model = train_multiclass(classes, samples, labels, config.training);
  outcome.model.extraction = ExtractionSettings{
      config.features, config.descriptor, config.kmeans, to_string(config.selection),
      spec.train_per_class, spec.seed};
  return outcome;
}

TrainingOutcome run_training(const DatasetManifest& manifest, const DatasetSplit& split,
                             const SplitSpec& spec, const PipelineConfig& config,
                             const WarningSink& warn) {
  require(!config.features.empty(), "feature list is empty");
  const DescriptorTable table = compute_descriptors(split.train, config.features, config, warn);
  std::vector<std::size_t> rows(split.train.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return train_from_table(table, rows, manifest.classes, spec, config);
}

EvaluationReport evaluate_predictions(const std::vector<std::string>& classes,
                                      std::span<const std::size_t> truth,
                                      std::span<const std::size_t> predicted, std::size_t ties) {
  require(truth.size() == predicted.size(), "evaluate: truth and prediction counts differ");
  require(!truth.empty(), "evaluate: empty test set");
  const std::size_t n = classes.size();
  EvaluationReport report;
  report.classes = classes;
  report.confusion.assign(n, std::vector<std::size_t>(n, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] < n && predicted[i] < n, "evaluate: class index out of range");
    ++report.confusion[truth[i]][predicted[i]];
  }
  std::size_t correct = 0;
  double per_class_sum = 0.0;
  std::size_t per_class_count = 0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t row_sum = 0;
    for (std::size_t v : report.confusion[c]) row_sum += v;
    correct += report.confusion[c][c];
    if (row_sum == 0) {
      report.per_class_accuracy.emplace_back(std::nullopt);
      continue;
    }
    const double acc = static_cast<double>(report.confusion[c][c]) /
                       static_cast<double>(row_sum) * 100.0;
    report.per_class_accuracy.emplace_back(acc);
    per_class_sum += acc;
    ++per_class_count;
  }
  report.overall_accuracy =
      static_cast<double>(correct) / static_cast<double>(truth.size()) * 100.0;
  if (per_class_count > 0) {
    report.average_accuracy = per_class_sum / static_cast<double>(per_class_count);
  }
  report.ties = ties;
  report.classified = truth.size();
  report.test_size = truth.size();
  return report;
}

EvaluationReport evaluate_from_table(const MulticlassModel& model, const DescriptorTable& table,
                                     std::span<const std::size_t> rows) {
  require(!rows.empty(), "evaluate: empty test set");
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
  std::vector<SkippedImage> skipped;
  std::size_t ties = 0;
  for (std::size_t row : rows) {
    const auto& entry = table.entries[row];
    if (!table.ok(row)) {
      skipped.push_back({entry.path, table.failures[row]});
      continue;
    }
    const auto it = std::find(model.classes.begin(), model.classes.end(), entry.label);
    require(it != model.classes.end(), "test label '" + entry.label + "' is unknown to the model");
    const Prediction p = classify(model, table.fused(row, model.extraction.features));
    truth.push_back(static_cast<std::size_t>(it - model.classes.begin()));
    predicted.push_back(p.class_index);
    if (p.tie) ++ties;
  }
  if (truth.empty()) fail(ErrorKind::EmptyRegion, "evaluate: every test image was skipped");
  EvaluationReport report = evaluate_predictions(model.classes, truth, predicted, ties);
  report.test_size = rows.size();
  report.skipped = std::move(skipped);
  report.train_per_class = model.extraction.train_per_class;
  report.split_seed = model.extraction.split_seed;
  report.features = model.extraction.features;
  report.descriptor = model.extraction.descriptor;
  return report;
}

EvaluationReport evaluate(const MulticlassModel& model, std::span<const ManifestEntry> test,
                          const WarningSink& warn) {
  require(!test.empty(), "evaluate: empty test set");
  PipelineConfig config;
  config.features = model.extraction.features;
  config.descriptor = model.extraction.descriptor;
  config.kmeans = model.extraction.kmeans;
  config.selection = parse_selection(model.extraction.selection);
  const DescriptorTable table = compute_descriptors(test, config.features, config, warn);
  std::vector<std::size_t> rows(test.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return evaluate_from_table(model, table, rows);
}

RepeatSummary summarize(std::span<const EvaluationReport> reports) {
  require(!reports.empty(), "summarize: no reports");
  RepeatSummary s;
  s.repeats = reports.size();
  const auto n = static_cast<double>(reports.size());
  for (const auto& r : reports) {
    s.mean_accuracy += r.overall_accuracy;
    s.mean_average_accuracy += r.average_accuracy.value_or(0.0);
  }
  s.mean_accuracy /= n;
  s.mean_average_accuracy /= n;
  if (reports.size() > 1) {
    for (const auto& r : reports) {
      s.stddev_accuracy += std::pow(r.overall_accuracy - s.mean_accuracy, 2);
      s.stddev_average_accuracy +=
          std::pow(r.average_accuracy.value_or(0.0) - s.mean_average_accuracy, 2);
    }
    s.stddev_accuracy = std::sqrt(s.stddev_accuracy / (n - 1.0));
    s.stddev_average_accuracy = std::sqrt(s.stddev_average_accuracy / (n - 1.0));
  }
  return s;
}

void require_compatible(const MulticlassModel& model, std::span<const std::string> features,
                        const DescriptorConfig* descriptor) {
  if (!features.empty() &&
      !std::equal(features.begin(), features.end(), model.extraction.features.begin(),
                  model.extraction.features.end())) {
    fail(ErrorKind::Mismatch, "requested features " + join_feature_list(features) +
                                  " differ from the model's " +
                                  join_feature_list(model.extraction.features));
  }
  if (descriptor && !(*descriptor == model.extraction.descriptor)) {
    fail(ErrorKind::Mismatch, "descriptor parameters differ from those the model was trained with");
  }
}

ClassifyOutcome classify_one(const std::filesystem::path& model_path,
                             const std::filesystem::path& image_path,
                             const std::optional<SelectionStrategy>& selection,
                             const std::optional<std::filesystem::path>& out_mask,
                             const std::optional<std::filesystem::path>& out_overlay) {
  const MulticlassModel model = load_model(model_path);
  const SelectionStrategy strategy =
      selection ? *selection : parse_selection(model.extraction.selection);
  try {
    const ImageBuffer rgb = load_image(image_path);
    ImageAnalysis analysis = analyze_image(rgb, model.extraction.features,
                                           model.extraction.descriptor, model.extraction.kmeans,
                                           strategy);
    ClassifyOutcome out{classify(model, analysis.features), std::move(analysis.segmentation)};
    if (out_mask) save_mask_png(out.segmentation.mask, *out_mask);
    if (out_overlay) save_png(mask_to_image(rgb, out.segmentation.mask), *out_overlay);
    return out;
  } catch (const Error& e) {
    rethrow_for(image_path, e);
  }
}

void write_feature_file(std::span<const FeatureVector> vectors, std::ostream& out) {
  require(!vectors.empty(), "no feature vectors to write");
  const auto& layout = vectors.front().blocks;
  out << "#blocks";
  for (const auto& b : layout) out << ' ' << b.name << ':' << b.length;
  out << '\n';
  char buf[32];
  for (const auto& fv : vectors) {
    require(fv.size() == vectors.front().size(), "feature vectors differ in length");
    for (std::size_t i = 0; i < fv.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", fv.values[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

std::vector<FeatureVector> read_feature_file(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("#blocks")) {
    fail(ErrorKind::Parse, "feature file: missing '#blocks' header");
  }
  std::vector<FeatureBlock> layout;
  std::istringstream header(line.substr(7));
  std::string token;
  std::size_t offset = 0;
  while (header >> token) {
    const auto colon = token.rfind(':');
    if (colon == std::string::npos) fail(ErrorKind::Parse, "feature file: bad block '" + token + "'");
    const std::size_t length = std::stoul(token.substr(colon + 1));
    layout.push_back({token.substr(0, colon), offset, length, false});
    offset += length;
  }
  std::vector<FeatureVector> vectors;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream row(line);
    FeatureVector fv;
    fv.blocks = layout;
    double v = 0.0;
    while (row >> v) fv.values.push_back(v);
    if (!row.eof() || fv.values.size() != offset) {
      fail(ErrorKind::Parse, "feature file line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(offset) + " values");
    }
    vectors.push_back(std::move(fv));
  }
  return vectors;
}

}  // namespace fruitscan
