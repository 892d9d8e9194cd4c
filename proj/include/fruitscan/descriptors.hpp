#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fruitscan/imaging.hpp"

namespace fruitscan {

// Threshold used by the CLBP magnitude component.
enum class ClbpThreshold {
  MagnitudeMean,  // mean of |v_n - v_c| over all valid centers and neighbors
  GrayMean,       // mean gray level of the masked region
};

struct DescriptorConfig {
  int gch_levels = 4;
  int ccv_levels = 4;
  int ccv_blur_radius = 1;  // 0 disables the blur
  double ccv_tau = 0.01;    // fraction of masked pixels
  int lbp_neighbors = 8;
  double lbp_radius = 1.0;
  double ltp_theta = 5.0;
  ClbpThreshold clbp_threshold = ClbpThreshold::MagnitudeMean;
  int cdh_color_bins = 90;  // fixed L:10 x a:3 x b:3 layout
  int cdh_orientation_bins = 18;
  int cdh_distance = 1;
  int seh_bins = 72;  // fixed H:8 x S:3 x V:3 layout

  void validate() const;
  bool operator==(const DescriptorConfig&) const = default;
};

struct FeatureBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;
  bool degenerate = false;  // all-zero histogram (nothing to normalize)

  bool operator==(const FeatureBlock&) const = default;
};

struct FeatureVector {
  std::vector<double> values;
  std::vector<FeatureBlock> blocks;

  std::size_t size() const noexcept { return values.size(); }
  static FeatureVector single(std::string name, std::vector<double> values);

  bool operator==(const FeatureVector&) const = default;
};

// Scales each block to unit sum. All-zero blocks stay zero and are flagged.
FeatureVector normalize(FeatureVector fv);

// Concatenation; block offsets are rebased onto the fused vector.
FeatureVector fuse(std::span<const FeatureVector> parts);

FeatureVector gch(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config);
FeatureVector ccv(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config);
FeatureVector cdh(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config);
FeatureVector seh(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config);

// Coherent/incoherent split of an already quantized image: coherent counts
// in [0, bins), incoherent in [bins, 2*bins), normalized jointly.
FeatureVector coherence_vector(const QuantizedImage& quantized, const Mask& mask,
                               double tau);

// Sampling geometry of a circular (N, R) neighborhood. Offsets within 1e-9
// of an integer are snapped so axis-aligned samples hit the grid exactly.
struct NeighborSample {
  double dx = 0.0;
  double dy = 0.0;
  int x0 = 0;  // floor(dx)
  int y0 = 0;  // floor(dy)
  double fx = 0.0;
  double fy = 0.0;
};
std::vector<NeighborSample> circular_neighborhood(int neighbors, double radius);

// Bilinear sample of a GRAY8 image; exact on the grid and on flat patches.
double sample_gray(const ImageBuffer& gray, int x, int y, const NeighborSample& s);

// True if every sample (and every bilinear support pixel it touches) lies
// in-bounds and, when a mask is given, inside the mask.
bool neighborhood_valid(const ImageBuffer& gray, const Mask* mask, int x, int y,
                        std::span<const NeighborSample> samples);

std::uint32_t lbp_code(const ImageBuffer& gray, int x, int y, int neighbors, double radius);

FeatureVector lbp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config);
FeatureVector ltp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config);
FeatureVector clbp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config);

// Names accepted by extract(): gch ccv cdh seh lbp ltp clbp.
const std::vector<std::string>& descriptor_names();
std::size_t descriptor_length(const std::string& name, const DescriptorConfig& config);

// Runs one named descriptor on an RGB8 image; the texture descriptors
// convert to gray first.
FeatureVector extract(const std::string& name, const ImageBuffer& rgb, const Mask& mask,
                      const DescriptorConfig& config);

// Each named descriptor, normalized, then fused in order.
FeatureVector extract_fused(std::span<const std::string> names, const ImageBuffer& rgb,
                            const Mask& mask, const DescriptorConfig& config);

// Comma separated list, e.g. "cdh,seh,clbp". Unknown names raise Parse.
std::vector<std::string> parse_feature_list(const std::string& text);
std::string join_feature_list(std::span<const std::string> names);

}  // namespace fruitscan
