#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fruitscan/imaging.hpp"

namespace fruitscan {

using Point2 = std::array<double, 2>;

struct KMeansConfig {
  int k = 4;
  int max_iterations = 100;
  double tolerance = 1e-4;  // max centroid displacement, a*b* units
  std::uint64_t seed = 0;
  int restarts = 3;

  void validate() const;
  bool operator==(const KMeansConfig&) const = default;
};

struct ClusterResult {
  std::vector<Point2> centroids;
  std::vector<std::uint32_t> assignments;
  double sse = 0.0;
  int iterations_run = 0;
  // SSE after every assignment step of the returned restart.
  std::vector<double> sse_trace;

  bool operator==(const ClusterResult&) const = default;
};

// Lloyd's algorithm, squared Euclidean distance, k-means++ seeding.
// Ties in assignment go to the lowest centroid index.
ClusterResult kmeans(std::span<const Point2> points, const KMeansConfig& config);

struct ClusterStats {
  std::size_t pixel_count = 0;
  double mean_l = 0.0;
  double mean_a = 0.0;
  double mean_b = 0.0;

  bool operator==(const ClusterStats&) const = default;
};

struct SegmentationResult {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> labels;
  std::vector<ClusterStats> cluster_stats;
  std::optional<std::uint32_t> selected_cluster;
  Mask mask;  // empty until a cluster is selected
};

// Clusters the (a*, b*) pairs of every pixel.
SegmentationResult segment_image(const ImageBuffer& img, const KMeansConfig& config);

struct SelectDarkest {};
struct SelectManual {
  std::uint32_t index = 0;
};
using SelectionStrategy = std::variant<SelectDarkest, SelectManual>;

// "darkest" or "manual:<i>".
SelectionStrategy parse_selection(const std::string& text);
std::string to_string(const SelectionStrategy& strategy);

// darkest: lowest mean L* among non-empty clusters covering < 50% of pixels.
SegmentationResult select_disease_cluster(SegmentationResult seg,
                                          const SelectionStrategy& strategy);

// Pixels outside the mask become zero (black).
ImageBuffer mask_to_image(const ImageBuffer& img, const Mask& mask);

}  // namespace fruitscan
