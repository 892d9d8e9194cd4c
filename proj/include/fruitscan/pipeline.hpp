#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fruitscan/classifier.hpp"
#include "fruitscan/descriptors.hpp"
#include "fruitscan/segmentation.hpp"

namespace fruitscan {

struct ManifestEntry {
  std::filesystem::path path;
  std::string label;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> classes;  // first-appearance order

  std::size_t class_index(const std::string& label) const;
};

// CSV with a `path,label` header. Relative paths resolve against the
// manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct SplitSpec {
  std::size_t train_per_class = 0;
  std::uint64_t seed = 0;
};

struct DatasetSplit {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> test;
};

// Exactly train_per_class entries of every class go to training, chosen
// uniformly by seed; the rest are the test set. Manifest order is kept.
DatasetSplit split_dataset(const DatasetManifest& manifest, const SplitSpec& spec);

struct PipelineConfig {
  std::vector<std::string> features{"cdh", "seh", "clbp"};
  DescriptorConfig descriptor;
  KMeansConfig kmeans;
  SelectionStrategy selection = SelectDarkest{};
  TrainingConfig training;
};

using WarningSink = std::function<void(const std::string&)>;
void warn_to_stderr(const std::string& message);

struct SkippedImage {
  std::filesystem::path path;
  std::string reason;

  bool operator==(const SkippedImage&) const = default;
};

struct ImageAnalysis {
  SegmentationResult segmentation;
  FeatureVector features;
};

// segment -> select -> extract each named descriptor on the mask -> fuse.
ImageAnalysis analyze_image(const ImageBuffer& rgb, std::span<const std::string> features,
                            const DescriptorConfig& descriptor, const KMeansConfig& kmeans,
                            const SelectionStrategy& selection);

// Every requested descriptor for every entry, computed once so several
// feature combinations can be trained from the same extraction.
struct DescriptorTable {
  std::vector<ManifestEntry> entries;
  std::vector<std::map<std::string, FeatureVector>> descriptors;  // empty on failure
  std::vector<std::string> failures;                              // empty on success

  bool ok(std::size_t i) const { return failures[i].empty(); }
  FeatureVector fused(std::size_t i, std::span<const std::string> names) const;
};

// Images whose content defeats segmentation or extraction are recorded in
// `failures` and reported through `warn`; unreadable files still throw.
DescriptorTable compute_descriptors(std::span<const ManifestEntry> entries,
                                    std::span<const std::string> names,
                                    const PipelineConfig& config,
                                    const WarningSink& warn = warn_to_stderr);

struct TrainingOutcome {
  MulticlassModel model;
  std::vector<SkippedImage> skipped;
};

TrainingOutcome run_training(const DatasetManifest& manifest, const DatasetSplit& split,
                             const SplitSpec& spec, const PipelineConfig& config,
                             const WarningSink& warn = warn_to_stderr);

// Trains from a precomputed table restricted to `rows`.
TrainingOutcome train_from_table(const DescriptorTable& table, std::span<const std::size_t> rows,
                                 const std::vector<std::string>& classes,
                                 const SplitSpec& spec, const PipelineConfig& config);

struct EvaluationReport {
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // rows true, cols predicted
  std::vector<std::optional<double>> per_class_accuracy;  // percent; nullopt: no test images
  double overall_accuracy = 0.0;                           // percent, pooled
  std::optional<double> average_accuracy;                  // percent, mean of per-class
  std::size_t ties = 0;
  std::size_t test_size = 0;
  std::size_t classified = 0;
  std::vector<SkippedImage> skipped;
  std::size_t train_per_class = 0;
  std::uint64_t split_seed = 0;
  std::vector<std::string> features;
  DescriptorConfig descriptor;

  bool operator==(const EvaluationReport&) const = default;
};

// Confusion and accuracies from (true, predicted) class indices.
EvaluationReport evaluate_predictions(const std::vector<std::string>& classes,
                                      std::span<const std::size_t> truth,
                                      std::span<const std::size_t> predicted,
                                      std::size_t ties = 0);

EvaluationReport evaluate(const MulticlassModel& model, std::span<const ManifestEntry> test,
                          const WarningSink& warn = warn_to_stderr);

EvaluationReport evaluate_from_table(const MulticlassModel& model, const DescriptorTable& table,
                                     std::span<const std::size_t> rows);

enum class ReportFormat { Json, Csv, Table };
ReportFormat parse_report_format(const std::string& text);

std::string emit_report(const EvaluationReport& report, ReportFormat format);
EvaluationReport report_from_json(const std::string& text);

// Several reports (one per feature combination) as rows of one table.
std::string emit_comparison_table(std::span<const EvaluationReport> reports);

// Mismatch error if explicitly requested features or descriptor parameters
// differ from the ones the model was trained with. Empty features skip that check.
void require_compatible(const MulticlassModel& model, std::span<const std::string> features,
                        const DescriptorConfig* descriptor);

struct RepeatSummary {
  std::size_t repeats = 0;
  double mean_accuracy = 0.0;  // pooled overall accuracy, percent
  double stddev_accuracy = 0.0;
  double mean_average_accuracy = 0.0;
  double stddev_average_accuracy = 0.0;
};
RepeatSummary summarize(std::span<const EvaluationReport> reports);

struct ClassifyOutcome {
  Prediction prediction;
  SegmentationResult segmentation;
};

// Loads the model and image, runs the model's own extraction settings.
ClassifyOutcome classify_one(const std::filesystem::path& model_path,
                             const std::filesystem::path& image_path,
                             const std::optional<SelectionStrategy>& selection = std::nullopt,
                             const std::optional<std::filesystem::path>& out_mask = std::nullopt,
                             const std::optional<std::filesystem::path>& out_overlay = std::nullopt);

// Line-oriented feature file: "#blocks name:length ..." then one vector per line.
void write_feature_file(std::span<const FeatureVector> vectors, std::ostream& out);
std::vector<FeatureVector> read_feature_file(std::istream& in);

}  // namespace fruitscan
