#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fruitscan/descriptors.hpp"
#include "fruitscan/segmentation.hpp"

namespace fruitscan {

struct SvmConfig {
  double c = 1.0;
  int epochs = 200;
  double eta0 = 0.1;
  std::uint64_t seed = 0;
  double tolerance = 1e-6;  // relative objective change that ends training

  void validate() const;
  bool operator==(const SvmConfig&) const = default;
};

// Linear soft-margin SVM; decision(x) = w.x + b, outcome +1 when >= 0.
struct BinarySvm {
  std::vector<double> weights;
  double bias = 0.0;
  std::string positive_class;
  std::string negative_class;
  std::size_t positive_samples = 0;
  std::size_t negative_samples = 0;

  double decision(std::span<const double> x) const;
  int outcome(std::span<const double> x) const { return decision(x) >= 0.0 ? 1 : -1; }

  bool operator==(const BinarySvm&) const = default;
};

// Minimizes 0.5*|w|^2 + C * sum(hinge) by seeded stochastic subgradient
// descent. Step size eta0 / (1 + eta0 * t / C), t in (fractional) epochs.
// The objective at the end of every epoch is appended to objective_trace.
BinarySvm train_binary(std::span<const FeatureVector> samples, std::span<const int> labels,
                       const SvmConfig& config, std::vector<double>* objective_trace = nullptr);

double hinge_objective(const BinarySvm& svm, std::span<const FeatureVector> samples,
                       std::span<const int> labels, double c);

// One row per class, one column per class pair (i, j), i < j, in
// lexicographic order; +1 at row i, -1 at row j, 0 (don't care) elsewhere.
class IdMatrix {
 public:
  IdMatrix() = default;
  static IdMatrix build(std::size_t n_classes);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return pairs_.size(); }
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const noexcept {
    return pairs_;
  }
  int at(std::size_t row, std::size_t col) const { return entries_[row * cols() + col]; }

  bool operator==(const IdMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;
  std::vector<std::int8_t> entries_;
};

inline IdMatrix build_id_matrix(std::size_t n_classes) { return IdMatrix::build(n_classes); }

struct Decoded {
  std::size_t class_index = 0;
  std::vector<int> distances;  // mismatches over each class's non-zero columns
  bool tie = false;
};

// Minimum-distance decoding; ties go to the lowest class index.
Decoded decode(std::span<const int> outcomes, const IdMatrix& id);

// Per-dimension affine map applied before the SVMs: (x - offset) * scale.
struct FeatureScaling {
  std::vector<double> offset;
  std::vector<double> scale;

  bool empty() const noexcept { return offset.empty(); }
  std::vector<double> apply(std::span<const double> x) const;
  static FeatureScaling fit(std::span<const FeatureVector> samples);

  bool operator==(const FeatureScaling&) const = default;
};

// Everything needed to turn an image into the model's feature vector.
struct ExtractionSettings {
  std::vector<std::string> features;
  DescriptorConfig descriptor;
  KMeansConfig kmeans;
  std::string selection = "darkest";
  std::size_t train_per_class = 0;
  std::uint64_t split_seed = 0;

  bool operator==(const ExtractionSettings&) const = default;
};

struct MulticlassModel {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::vector<std::string> classes;
  IdMatrix id_matrix;
  std::vector<BinarySvm> learners;
  std::vector<FeatureBlock> layout;
  FeatureScaling scaling;
  SvmConfig svm;
  ExtractionSettings extraction;

  std::size_t dimension() const;
  bool operator==(const MulticlassModel&) const = default;
};

struct TrainingConfig {
  SvmConfig svm;
  bool standardize = true;
};

// labels[i] indexes classes. Learner (i, j) sees only classes i and j.
MulticlassModel train_multiclass(std::span<const std::string> classes,
                                 std::span<const FeatureVector> samples,
                                 std::span<const std::size_t> labels,
                                 const TrainingConfig& config);

struct Prediction {
  std::string label;
  std::size_t class_index = 0;
  std::vector<int> outcomes;
  std::vector<int> distances;
  bool tie = false;
};

Prediction classify(const MulticlassModel& model, const FeatureVector& fv);

void save_model(const MulticlassModel& model, const std::filesystem::path& path);
MulticlassModel load_model(const std::filesystem::path& path);

std::string serialize_model(const MulticlassModel& model);
MulticlassModel deserialize_model(const std::string& text);

}  // namespace fruitscan
