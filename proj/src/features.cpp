#include <algorithm>
#include <cmath>
#include <sstream>

#include "fruitscan/descriptors.hpp"
#include "fruitscan/error.hpp"

namespace fruitscan {

void DescriptorConfig::validate() const {
  require(gch_levels >= 1 && ccv_levels >= 1, "quantization levels must be >= 1");
  require(ccv_blur_radius >= 0, "ccv_blur_radius must be >= 0");
  require(ccv_tau >= 0.0 && ccv_tau <= 1.0, "ccv_tau must lie in [0, 1]");
  require(lbp_neighbors >= 1 && lbp_neighbors <= 16, "lbp_neighbors must lie in [1, 16]");
  require(lbp_radius > 0.0, "lbp_radius must be > 0");
  require(ltp_theta >= 0.0, "ltp_theta must be >= 0");
  require(cdh_color_bins == 90, "cdh_color_bins is fixed at 90 (L:10 x a:3 x b:3)");
  require(cdh_orientation_bins >= 1, "cdh_orientation_bins must be >= 1");
  require(cdh_distance >= 1, "cdh_distance must be >= 1");
  require(seh_bins == 72, "seh_bins is fixed at 72 (H:8 x S:3 x V:3)");
}

FeatureVector FeatureVector::single(std::string name, std::vector<double> values) {
  FeatureVector fv;
  fv.blocks.push_back(FeatureBlock{std::move(name), 0, values.size(), false});
  fv.values = std::move(values);
  return fv;
}

namespace {

void check_layout(const FeatureVector& fv) {
  std::size_t expected = 0;
  for (const auto& block : fv.blocks) {
    require(block.offset == expected, "feature blocks must be contiguous");
    expected += block.length;
  }
  require(expected == fv.values.size(), "feature block lengths must sum to the vector length");
}

}  // namespace

FeatureVector normalize(FeatureVector fv) {
  if (fv.blocks.empty()) fv.blocks.push_back({"values", 0, fv.values.size(), false});
  check_layout(fv);
  for (double v : fv.values) {
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "normalize: non-finite feature value");
  }
  for (auto& block : fv.blocks) {
    const auto first = fv.values.begin() + static_cast<std::ptrdiff_t>(block.offset);
    const auto last = first + static_cast<std::ptrdiff_t>(block.length);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) sum += *it;
    block.degenerate = sum == 0.0;
    if (block.degenerate) continue;
    for (auto it = first; it != last; ++it) *it /= sum;
  }
  return fv;
}

FeatureVector fuse(std::span<const FeatureVector> parts) {
  require(!parts.empty(), "fuse: nothing to fuse");
  FeatureVector fused;
  for (const auto& part : parts) {
    check_layout(part);
    const std::size_t base = fused.values.size();
    fused.values.insert(fused.values.end(), part.values.begin(), part.values.end());
    for (auto block : part.blocks) {
      block.offset += base;
      fused.blocks.push_back(std::move(block));
    }
  }
  return fused;
}

const std::vector<std::string>& descriptor_names() {
  static const std::vector<std::string> names{"gch", "ccv", "cdh", "seh",
                                              "lbp", "ltp", "clbp"};
  return names;
}

std::size_t descriptor_length(const std::string& name, const DescriptorConfig& config) {
  const auto cube = [](int levels) {
    return static_cast<std::size_t>(levels) * levels * levels;
  };
  const std::size_t patterns = std::size_t{1} << config.lbp_neighbors;
  if (name == "gch") return cube(config.gch_levels);
  if (name == "ccv") return 2 * cube(config.ccv_levels);
  if (name == "cdh") {
    return static_cast<std::size_t>(config.cdh_color_bins + config.cdh_orientation_bins);
  }
  if (name == "seh") return static_cast<std::size_t>(config.seh_bins);
  if (name == "lbp") return patterns;
  if (name == "ltp") return 2 * patterns;
  if (name == "clbp") return 2 * patterns + 2;
  fail(ErrorKind::Parse, "unknown descriptor '" + name + "'");
}

namespace {

bool is_texture(const std::string& name) {
  return name == "lbp" || name == "ltp" || name == "clbp";
}

FeatureVector run_descriptor(const std::string& name, const ImageBuffer& rgb,
                             const ImageBuffer& gray, const Mask& mask,
                             const DescriptorConfig& config) {
  if (name == "gch") return gch(rgb, mask, config);
  if (name == "ccv") return ccv(rgb, mask, config);
  if (name == "cdh") return cdh(rgb, mask, config);
  if (name == "seh") return seh(rgb, mask, config);
  if (name == "lbp") return lbp_hist(gray, mask, config);
  if (name == "ltp") return ltp_hist(gray, mask, config);
  if (name == "clbp") return clbp_hist(gray, mask, config);
  fail(ErrorKind::Parse, "unknown descriptor '" + name + "'");
}

}  // namespace

FeatureVector extract(const std::string& name, const ImageBuffer& rgb, const Mask& mask,
                      const DescriptorConfig& config) {
  require(rgb.space() == ColorSpace::Rgb8, "extract expects an RGB8 image");
  const ImageBuffer gray = is_texture(name) ? rgb_to_gray(rgb) : ImageBuffer{};
  return run_descriptor(name, rgb, gray, mask, config);
}

FeatureVector extract_fused(std::span<const std::string> names, const ImageBuffer& rgb,
                            const Mask& mask, const DescriptorConfig& config) {
  require(!names.empty(), "extract_fused: empty feature list");
  require(rgb.space() == ColorSpace::Rgb8, "extract_fused expects an RGB8 image");
  const bool needs_gray = std::any_of(names.begin(), names.end(), is_texture);
  const ImageBuffer gray = needs_gray ? rgb_to_gray(rgb) : ImageBuffer{};
  std::vector<FeatureVector> parts;
  parts.reserve(names.size());
  for (const auto& name : names) {
    parts.push_back(run_descriptor(name, rgb, gray, mask, config));
  }
  return fuse(parts);
}

std::vector<std::string> parse_feature_list(const std::string& text) {
  std::vector<std::string> names;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    item = item.substr(first, item.find_last_not_of(" \t") - first + 1);
    std::transform(item.begin(), item.end(), item.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    const auto& known = descriptor_names();
    if (std::find(known.begin(), known.end(), item) == known.end()) {
      fail(ErrorKind::Parse, "unknown descriptor '" + item +
                                 "' (expected gch, ccv, cdh, seh, lbp, ltp or clbp)");
    }
    if (std::find(names.begin(), names.end(), item) != names.end()) {
      fail(ErrorKind::Parse, "descriptor '" + item + "' listed twice");
    }
    names.push_back(item);
  }
  require(!names.empty(), "feature list is empty");
  return names;
}

std::string join_feature_list(std::span<const std::string> names) {
  std::string out;
  for (const auto& name : names) {
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

}  // namespace fruitscan
