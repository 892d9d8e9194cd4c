#include "fruitscan/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fruitscan/error.hpp"
#include "random.hpp"

namespace fruitscan {

void KMeansConfig::validate() const {
  require(k >= 1, "kmeans: k must be >= 1");
  require(max_iterations >= 1, "kmeans: max_iterations must be >= 1");
  require(tolerance >= 0.0, "kmeans: tolerance must be >= 0");
  require(restarts >= 1, "kmeans: restarts must be >= 1");
}

namespace {

double squared_distance(const Point2& p, const Point2& q) {
  const double dx = p[0] - q[0];
  const double dy = p[1] - q[1];
  return dx * dx + dy * dy;
}

std::size_t count_distinct(std::span<const Point2> points) {
  std::vector<Point2> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(
      std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

class Lloyd {
 public:
  Lloyd(std::span<const Point2> points, const KMeansConfig& config)
      : points_(points),
        config_(config),
        assignments_(points.size(), 0),
        distances_(points.size(), 0.0) {}

  ClusterResult run(detail::Rng& rng) {
    seed_plus_plus(rng);
    ClusterResult result;
    assign_and_repair();
    result.sse_trace.push_back(sse());

    int iteration = 0;
    while (iteration < config_.max_iterations) {
      ++iteration;
      const double moved = update_centroids();
      assign_and_repair();
      result.sse_trace.push_back(sse());
      if (moved < config_.tolerance) break;
    }

    result.centroids = centroids_;
    result.assignments = assignments_;
    result.sse = result.sse_trace.back();
    result.iterations_run = iteration;
    return result;
  }

 private:
  void seed_plus_plus(detail::Rng& rng) {
    const std::size_t n = points_.size();
    centroids_.clear();
    centroids_.push_back(points_[rng.below(n)]);
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = squared_distance(points_[i], centroids_[0]);
    }
    while (centroids_.size() < static_cast<std::size_t>(config_.k)) {
      double total = 0.0;
      for (double d : nearest) total += d;
      const double target = rng.unit() * total;
      std::size_t chosen = n;
      double cumulative = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (nearest[i] <= 0.0) continue;
        cumulative += nearest[i];
        chosen = i;
        if (cumulative > target) break;
      }
      // chosen == n only if every point already sits on a centroid, which
      // the distinct-point check rules out.
      centroids_.push_back(points_[chosen]);
      for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = std::min(nearest[i], squared_distance(points_[i], centroids_.back()));
      }
    }
  }

  void assign() {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      std::uint32_t best = 0;
      double best_d = squared_distance(points_[i], centroids_[0]);
      for (std::size_t c = 1; c < centroids_.size(); ++c) {
        const double d = squared_distance(points_[i], centroids_[c]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(c);
        }
      }
      assignments_[i] = best;
      distances_[i] = best_d;
    }
  }

  // An empty cluster is reseeded on the point farthest from its centroid,
  // then everything is reassigned. Neither step can raise the SSE.
  void assign_and_repair() {
    assign();
    for (std::size_t guard = 0; guard < 4 * centroids_.size() + 4; ++guard) {
      std::vector<std::size_t> counts(centroids_.size(), 0);
      for (auto a : assignments_) ++counts[a];
      const auto empty = std::find(counts.begin(), counts.end(), 0u);
      if (empty == counts.end()) return;

      std::size_t farthest = 0;
      for (std::size_t i = 1; i < points_.size(); ++i) {
        if (distances_[i] > distances_[farthest]) farthest = i;
      }
      if (distances_[farthest] <= 0.0) return;
      centroids_[static_cast<std::size_t>(empty - counts.begin())] = points_[farthest];
      assign();
    }
  }

  double update_centroids() {
    std::vector<Point2> sums(centroids_.size(), Point2{0.0, 0.0});
    std::vector<std::size_t> counts(centroids_.size(), 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      auto& s = sums[assignments_[i]];
      s[0] += points_[i][0];
      s[1] += points_[i][1];
      ++counts[assignments_[i]];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      if (counts[c] == 0) continue;
      const Point2 next{sums[c][0] / static_cast<double>(counts[c]),
                        sums[c][1] / static_cast<double>(counts[c])};
      moved = std::max(moved, std::sqrt(squared_distance(next, centroids_[c])));
      centroids_[c] = next;
    }
    return moved;
  }

  double sse() const {
    double total = 0.0;
    for (double d : distances_) total += d;
    return total;
  }

  std::span<const Point2> points_;
  const KMeansConfig& config_;
  std::vector<Point2> centroids_;
  std::vector<std::uint32_t> assignments_;
  std::vector<double> distances_;
};

}  // namespace

ClusterResult kmeans(std::span<const Point2> points, const KMeansConfig& config) {
  config.validate();
  require(!points.empty(), "kmeans: no points to cluster");
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      fail(ErrorKind::Numeric, "kmeans: non-finite point");
    }
  }
  const std::size_t distinct = count_distinct(points);
  if (static_cast<std::size_t>(config.k) > distinct) {
    fail(ErrorKind::Infeasible, "kmeans: k=" + std::to_string(config.k) +
                                    " exceeds the number of distinct points (" +
                                    std::to_string(distinct) + ")");
  }

  detail::Rng rng(config.seed);
  ClusterResult best;
  for (int restart = 0; restart < config.restarts; ++restart) {
    Lloyd lloyd(points, config);
    ClusterResult candidate = lloyd.run(rng);
    if (restart == 0 || candidate.sse < best.sse) best = std::move(candidate);
  }
  return best;
}

SegmentationResult segment_image(const ImageBuffer& img, const KMeansConfig& config) {
  require(img.space() == ColorSpace::Rgb8, "segment_image expects an RGB8 image");
  require(img.pixel_count() > 0, "segment_image: empty image");
  const ImageBuffer lab = rgb_to_lab(img);
  const auto values = lab.reals();

  std::vector<Point2> ab(img.pixel_count());
  for (std::size_t p = 0; p < ab.size(); ++p) {
    ab[p] = {values[3 * p + 1], values[3 * p + 2]};
  }
  ClusterResult clusters = kmeans(ab, config);

  SegmentationResult seg;
  seg.width = img.width();
  seg.height = img.height();
  seg.labels = std::move(clusters.assignments);
  seg.cluster_stats.assign(static_cast<std::size_t>(config.k), ClusterStats{});
  for (std::size_t p = 0; p < seg.labels.size(); ++p) {
    auto& s = seg.cluster_stats[seg.labels[p]];
    ++s.pixel_count;
    s.mean_l += values[3 * p];
    s.mean_a += values[3 * p + 1];
    s.mean_b += values[3 * p + 2];
  }
  for (auto& s : seg.cluster_stats) {
    if (s.pixel_count == 0) continue;
    const auto n = static_cast<double>(s.pixel_count);
    s.mean_l /= n;
    s.mean_a /= n;
    s.mean_b /= n;
  }
  return seg;
}

SelectionStrategy parse_selection(const std::string& text) {
  if (text == "darkest") return SelectDarkest{};
  constexpr std::string_view kManual = "manual:";
  if (text.starts_with(kManual)) {
    const std::string digits = text.substr(kManual.size());
    if (!digits.empty() &&
        std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return SelectManual{static_cast<std::uint32_t>(std::stoul(digits))};
    }
  }
  fail(ErrorKind::Parse, "invalid selection strategy '" + text +
                             "' (expected darkest or manual:<index>)");
}

std::string to_string(const SelectionStrategy& strategy) {
  if (const auto* manual = std::get_if<SelectManual>(&strategy)) {
    return "manual:" + std::to_string(manual->index);
  }
  return "darkest";
}

SegmentationResult select_disease_cluster(SegmentationResult seg,
                                          const SelectionStrategy& strategy) {
  require(!seg.cluster_stats.empty() &&
              seg.labels.size() == static_cast<std::size_t>(seg.width) * seg.height,
          "select_disease_cluster: clustering has not been run");
  const std::size_t k = seg.cluster_stats.size();

  std::uint32_t chosen = 0;
  if (const auto* manual = std::get_if<SelectManual>(&strategy)) {
    if (manual->index >= k) {
      fail(ErrorKind::Range, "cluster index " + std::to_string(manual->index) +
                                 " out of range for k=" + std::to_string(k));
    }
    chosen = manual->index;
  } else {
    const double total = static_cast<double>(seg.labels.size());
    std::optional<std::uint32_t> darkest;
    for (std::uint32_t c = 0; c < k; ++c) {
      const auto& s = seg.cluster_stats[c];
      if (s.pixel_count == 0 || static_cast<double>(s.pixel_count) >= 0.5 * total) continue;
      if (!darkest || s.mean_l < seg.cluster_stats[*darkest].mean_l) darkest = c;
    }
    if (!darkest) {
      fail(ErrorKind::SelectionFailed,
           "no cluster covers less than half of the image; cannot pick a defect cluster");
    }
    chosen = *darkest;
  }

  seg.selected_cluster = chosen;
  seg.mask = Mask::filled(seg.width, seg.height, false);
  for (std::size_t p = 0; p < seg.labels.size(); ++p) {
    seg.mask.data[p] = seg.labels[p] == chosen ? 1 : 0;
  }
  return seg;
}

ImageBuffer mask_to_image(const ImageBuffer& img, const Mask& mask) {
  require(mask.width == img.width() && mask.height == img.height() &&
              mask.data.size() == img.pixel_count(),
          "mask_to_image: mask dimensions do not match the image");
  const int channels = img.channels();
  if (is_integer_space(img.space())) {
    std::vector<std::uint8_t> out(img.bytes().begin(), img.bytes().end());
    for (std::size_t p = 0; p < mask.data.size(); ++p) {
      if (mask.data[p]) continue;
      for (int c = 0; c < channels; ++c) out[p * channels + c] = 0;
    }
    return img.space() == ColorSpace::Rgb8
               ? ImageBuffer::rgb8(img.width(), img.height(), std::move(out))
               : ImageBuffer::gray8(img.width(), img.height(), std::move(out));
  }
  std::vector<double> out(img.reals().begin(), img.reals().end());
  for (std::size_t p = 0; p < mask.data.size(); ++p) {
    if (mask.data[p]) continue;
    for (int c = 0; c < channels; ++c) out[p * channels + c] = 0.0;
  }
  return img.space() == ColorSpace::Lab
             ? ImageBuffer::lab(img.width(), img.height(), std::move(out))
             : ImageBuffer::hsv(img.width(), img.height(), std::move(out));
}

}  // namespace fruitscan
