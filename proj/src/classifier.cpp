#include "fruitscan/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fruitscan/error.hpp"
#include "random.hpp"

namespace fruitscan {

void SvmConfig::validate() const {
  require(c > 0.0, "svm: C must be > 0");
  require(epochs >= 1, "svm: epochs must be >= 1");
  require(eta0 > 0.0, "svm: eta0 must be > 0");
  require(tolerance >= 0.0, "svm: tolerance must be >= 0");
}

double BinarySvm::decision(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    fail(ErrorKind::Mismatch, "feature dimension " + std::to_string(x.size()) +
                                  " does not match learner dimension " +
                                  std::to_string(weights.size()));
  }
  double sum = bias;
  for (std::size_t i = 0; i < x.size(); ++i) sum += weights[i] * x[i];
  return sum;
}

namespace {

std::size_t check_training_set(std::span<const FeatureVector> samples,
                               std::span<const int> labels) {
  require(!samples.empty(), "train_binary: no samples");
  require(samples.size() == labels.size(), "train_binary: one label per sample required");
  const std::size_t dim = samples.front().size();
  bool has_positive = false;
  bool has_negative = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    require(samples[i].size() == dim, "train_binary: samples differ in dimension");
    require(labels[i] == 1 || labels[i] == -1, "train_binary: labels must be +1 or -1");
    (labels[i] > 0 ? has_positive : has_negative) = true;
  }
  if (!has_positive || !has_negative) {
    fail(ErrorKind::DegenerateTraining, "train_binary: both label signs are required");
  }
  return dim;
}

}  // namespace

double hinge_objective(const BinarySvm& svm, std::span<const FeatureVector> samples,
                       std::span<const int> labels, double c) {
  double norm = 0.0;
  for (double w : svm.weights) norm += w * w;
  double loss = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    loss += std::max(0.0, 1.0 - labels[i] * svm.decision(samples[i].values));
  }
  return 0.5 * norm + c * loss;
}

BinarySvm train_binary(std::span<const FeatureVector> samples, std::span<const int> labels,
                       const SvmConfig& config, std::vector<double>* objective_trace) {
  config.validate();
  const std::size_t dim = check_training_set(samples, labels);
  const std::size_t n = samples.size();
  const double lambda = 1.0 / (config.c * static_cast<double>(n));

  BinarySvm svm;
  svm.weights.assign(dim, 0.0);
  for (int y : labels) ++(y > 0 ? svm.positive_samples : svm.negative_samples);

  detail::Rng rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  // w is kept as scale * v so the per-step shrink costs O(1).
  std::vector<double>& v = svm.weights;
  double scale = 1.0;
  std::size_t step = 0;
  double previous = hinge_objective(svm, samples, labels, config.c);
  // Near the optimum single SGD epochs jitter the objective up and down; the
  // returned model is the best epoch-boundary iterate.
  BinarySvm best = svm;
  double best_objective = previous;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      const double t = static_cast<double>(step++) / static_cast<double>(n);
      const double eta = config.eta0 / (1.0 + config.eta0 * t / config.c);
      const auto& x = samples[i].values;
      const double y = labels[i];
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += v[d] * x[d];
      const double margin = y * (scale * dot + svm.bias);

      scale *= 1.0 - eta * lambda;
      if (margin < 1.0) {
        const double g = eta * y / scale;
        for (std::size_t d = 0; d < dim; ++d) v[d] += g * x[d];
        svm.bias += eta * y;
      }
      if (scale < 1e-9) {
        for (double& w : v) w *= scale;
        scale = 1.0;
      }
    }
    for (double& w : v) w *= scale;
    scale = 1.0;

    const double objective = hinge_objective(svm, samples, labels, config.c);
    if (objective < best_objective) {
      best_objective = objective;
      best.weights = svm.weights;
      best.bias = svm.bias;
    }
    if (objective_trace) objective_trace->push_back(best_objective);
    const double change = std::abs(previous - objective);
    previous = objective;
    if (change <= config.tolerance * std::max(1.0, std::abs(objective))) break;
  }
  return best;
}

IdMatrix IdMatrix::build(std::size_t n_classes) {
  require(n_classes >= 2, "build_id_matrix: at least two classes are required");
  IdMatrix id;
  id.rows_ = n_classes;
  for (std::size_t i = 0; i < n_classes; ++i) {
    for (std::size_t j = i + 1; j < n_classes; ++j) id.pairs_.emplace_back(i, j);
  }
  id.entries_.assign(n_classes * id.pairs_.size(), 0);
  for (std::size_t col = 0; col < id.pairs_.size(); ++col) {
    id.entries_[id.pairs_[col].first * id.cols() + col] = 1;
    id.entries_[id.pairs_[col].second * id.cols() + col] = -1;
  }
  return id;
}

Decoded decode(std::span<const int> outcomes, const IdMatrix& id) {
  require(outcomes.size() == id.cols(),
          "decode: expected " + std::to_string(id.cols()) + " outcomes, got " +
              std::to_string(outcomes.size()));
  Decoded out;
  out.distances.assign(id.rows(), 0);
  for (std::size_t r = 0; r < id.rows(); ++r) {
    for (std::size_t col = 0; col < id.cols(); ++col) {
      const int entry = id.at(r, col);
      if (entry != 0) out.distances[r] += std::abs(outcomes[col] - entry) / 2;
    }
  }
  const auto best = std::min_element(out.distances.begin(), out.distances.end());
  out.class_index = static_cast<std::size_t>(best - out.distances.begin());
  out.tie = std::count(out.distances.begin(), out.distances.end(), *best) > 1;
  return out;
}

std::vector<double> FeatureScaling::apply(std::span<const double> x) const {
  if (empty()) return {x.begin(), x.end()};
  require(x.size() == offset.size(), "feature scaling dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - offset[i]) * scale[i];
  return out;
}

FeatureScaling FeatureScaling::fit(std::span<const FeatureVector> samples) {
  require(!samples.empty(), "cannot fit feature scaling on an empty set");
  const std::size_t dim = samples.front().size();
  const auto n = static_cast<double>(samples.size());
  FeatureScaling s;
  s.offset.assign(dim, 0.0);
  s.scale.assign(dim, 0.0);
  for (const auto& fv : samples) {
    for (std::size_t d = 0; d < dim; ++d) s.offset[d] += fv.values[d];
  }
  for (double& m : s.offset) m /= n;
  std::vector<double> var(dim, 0.0);
  for (const auto& fv : samples) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double e = fv.values[d] - s.offset[d];
      var[d] += e * e;
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var[d] / n);
    s.scale[d] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  // Give every fused block the same total weight so a long histogram does
  // not drown a short one. A single block keeps weight 1.
  const auto& blocks = samples.front().blocks;
  if (blocks.size() > 1) {
    for (const auto& b : blocks) {
      const double w = std::sqrt(static_cast<double>(dim) /
                                 (static_cast<double>(blocks.size()) * static_cast<double>(b.length)));
      for (std::size_t d = b.offset; d < b.offset + b.length; ++d) s.scale[d] *= w;
    }
  }
  return s;
}

std::size_t MulticlassModel::dimension() const {
  return learners.empty() ? 0 : learners.front().weights.size();
}

MulticlassModel train_multiclass(std::span<const std::string> classes,
                                 std::span<const FeatureVector> samples,
                                 std::span<const std::size_t> labels,
                                 const TrainingConfig& config) {
  require(classes.size() >= 2, "train_multiclass: at least two classes are required");
  require(samples.size() == labels.size(), "train_multiclass: one label per sample required");
  std::vector<std::size_t> per_class(classes.size(), 0);
  for (std::size_t label : labels) {
    require(label < classes.size(), "train_multiclass: label index out of range");
    ++per_class[label];
  }
  for (std::size_t c = 0; c < classes.size(); ++c) {
    require(per_class[c] > 0, "train_multiclass: class '" + classes[c] + "' has no samples");
  }
  const std::size_t dim = samples.front().size();
  for (const auto& fv : samples) {
    require(fv.size() == dim, "train_multiclass: samples differ in dimension");
  }

  MulticlassModel model;
  model.classes.assign(classes.begin(), classes.end());
  model.id_matrix = IdMatrix::build(classes.size());
  model.layout = samples.front().blocks;
  model.svm = config.svm;
  if (config.standardize) model.scaling = FeatureScaling::fit(samples);

  std::vector<FeatureVector> scaled;
  scaled.reserve(samples.size());
  for (const auto& fv : samples) {
    scaled.push_back(FeatureVector{model.scaling.apply(fv.values), {}});
  }

  for (const auto& [i, j] : model.id_matrix.pairs()) {
    std::vector<FeatureVector> pair_samples;
    std::vector<int> pair_labels;
    for (std::size_t s = 0; s < scaled.size(); ++s) {
      if (labels[s] != i && labels[s] != j) continue;
      pair_samples.push_back(scaled[s]);
      pair_labels.push_back(labels[s] == i ? 1 : -1);
    }
    BinarySvm svm = train_binary(pair_samples, pair_labels, config.svm);
    svm.positive_class = classes[i];
    svm.negative_class = classes[j];
    model.learners.push_back(std::move(svm));
  }
  return model;
}

namespace {

std::string describe_layout(const std::vector<FeatureBlock>& layout) {
  std::string out;
  for (const auto& block : layout) {
    if (!out.empty()) out += ", ";
    out += block.name + ":" + std::to_string(block.length);
  }
  return out.empty() ? "<unnamed>" : out;
}

}  // namespace

Prediction classify(const MulticlassModel& model, const FeatureVector& fv) {
  require(!model.learners.empty(), "classify: model has no learners");
  bool layout_ok = fv.size() == model.dimension();
  if (layout_ok && !fv.blocks.empty() && !model.layout.empty()) {
    layout_ok = fv.blocks.size() == model.layout.size();
    for (std::size_t b = 0; layout_ok && b < fv.blocks.size(); ++b) {
      layout_ok = fv.blocks[b].name == model.layout[b].name &&
                  fv.blocks[b].length == model.layout[b].length;
    }
  }
  if (!layout_ok) {
    fail(ErrorKind::Mismatch, "feature vector (" + std::to_string(fv.size()) + " values, " +
                                  describe_layout(fv.blocks) + ") does not match the model (" +
                                  std::to_string(model.dimension()) + " values, " +
                                  describe_layout(model.layout) + ")");
  }

  const std::vector<double> x = model.scaling.apply(fv.values);
  Prediction p;
  p.outcomes.reserve(model.learners.size());
  for (const auto& learner : model.learners) p.outcomes.push_back(learner.outcome(x));
  Decoded d = decode(p.outcomes, model.id_matrix);
  p.class_index = d.class_index;
  p.label = model.classes[d.class_index];
  p.distances = std::move(d.distances);
  p.tie = d.tie;
  return p;
}

}  // namespace fruitscan
