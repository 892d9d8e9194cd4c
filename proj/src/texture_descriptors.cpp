#include <cmath>
#include <numbers>

#include "fruitscan/descriptors.hpp"
#include "fruitscan/error.hpp"

namespace fruitscan {

namespace {

// Interpolation weights are irrational on diagonals, so a difference that is
// an exact tie in real arithmetic can land a few ulps either side of it.
constexpr double kTie = 1e-9;

double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

void check_gray_region(const ImageBuffer& gray, const Mask& mask, const char* op) {
  require(gray.space() == ColorSpace::Gray8, std::string(op) + " expects a GRAY8 image");
  require(mask.width == gray.width() && mask.height == gray.height() &&
              mask.data.size() == gray.pixel_count(),
          std::string(op) + ": mask dimensions do not match the image");
  if (mask.count() == 0) fail(ErrorKind::EmptyRegion, std::string(op) + ": empty mask");
}

// Neighbor values of every valid center, in raster order.
struct Neighborhoods {
  std::vector<double> centers;
  std::vector<double> neighbors;  // centers.size() * N values
};

Neighborhoods gather(const ImageBuffer& gray, const Mask& mask,
                     const DescriptorConfig& config, const char* op) {
  check_gray_region(gray, mask, op);
  const auto samples = circular_neighborhood(config.lbp_neighbors, config.lbp_radius);
  Neighborhoods out;
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      if (!neighborhood_valid(gray, &mask, x, y, samples)) continue;
      out.centers.push_back(gray.at(x, y));
      for (const auto& s : samples) out.neighbors.push_back(sample_gray(gray, x, y, s));
    }
  }
  if (out.centers.empty()) {
    fail(ErrorKind::EmptyRegion,
         std::string(op) + ": no masked pixel has its full neighborhood inside the mask");
  }
  return out;
}

}  // namespace

std::vector<NeighborSample> circular_neighborhood(int neighbors, double radius) {
  require(neighbors >= 1 && neighbors <= 16, "neighbor count must lie in [1, 16]");
  require(radius > 0.0, "radius must be > 0");
  std::vector<NeighborSample> samples(static_cast<std::size_t>(neighbors));
  for (int n = 0; n < neighbors; ++n) {
    const double angle = 2.0 * std::numbers::pi * n / neighbors;
    auto& s = samples[static_cast<std::size_t>(n)];
    s.dx = snap(radius * std::cos(angle));
    s.dy = snap(-radius * std::sin(angle));
    s.x0 = static_cast<int>(std::floor(s.dx));
    s.y0 = static_cast<int>(std::floor(s.dy));
    s.fx = s.dx - s.x0;
    s.fy = s.dy - s.y0;
  }
  return samples;
}

double sample_gray(const ImageBuffer& gray, int x, int y, const NeighborSample& s) {
  const int x0 = x + s.x0;
  const int y0 = y + s.y0;
  // lerp form: a flat support patch reproduces its value exactly.
  const auto row = [&](int yy) {
    const double left = gray.at(x0, yy);
    return s.fx > 0.0 ? left + s.fx * (gray.at(x0 + 1, yy) - left) : left;
  };
  const double top = row(y0);
  return s.fy > 0.0 ? top + s.fy * (row(y0 + 1) - top) : top;
}

bool neighborhood_valid(const ImageBuffer& gray, const Mask* mask, int x, int y,
                        std::span<const NeighborSample> samples) {
  const auto inside = [&](int px, int py) {
    if (px < 0 || py < 0 || px >= gray.width() || py >= gray.height()) return false;
    return mask == nullptr || mask->at(px, py);
  };
  if (!inside(x, y)) return false;
  for (const auto& s : samples) {
    const int x0 = x + s.x0;
    const int y0 = y + s.y0;
    const int x1 = s.fx > 0.0 ? x0 + 1 : x0;
    const int y1 = s.fy > 0.0 ? y0 + 1 : y0;
    if (!inside(x0, y0) || !inside(x1, y0) || !inside(x0, y1) || !inside(x1, y1)) {
      return false;
    }
  }
  return true;
}

std::uint32_t lbp_code(const ImageBuffer& gray, int x, int y, int neighbors, double radius) {
  require(gray.space() == ColorSpace::Gray8, "lbp_code expects a GRAY8 image");
  const auto samples = circular_neighborhood(neighbors, radius);
  if (!neighborhood_valid(gray, nullptr, x, y, samples)) {
    fail(ErrorKind::Range, "lbp_code: neighborhood of (" + std::to_string(x) + ", " +
                               std::to_string(y) + ") leaves the image");
  }
  const double center = gray.at(x, y);
  std::uint32_t code = 0;
  for (std::size_t n = 0; n < samples.size(); ++n) {
    if (sample_gray(gray, x, y, samples[n]) - center >= -kTie) code |= 1u << n;
  }
  return code;
}

FeatureVector lbp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  const Neighborhoods hood = gather(gray, mask, config, "lbp_hist");
  const std::size_t n = static_cast<std::size_t>(config.lbp_neighbors);
  std::vector<double> hist(std::size_t{1} << n, 0.0);
  for (std::size_t i = 0; i < hood.centers.size(); ++i) {
    std::uint32_t code = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (hood.neighbors[i * n + k] - hood.centers[i] >= -kTie) code |= 1u << k;
    }
    hist[code] += 1.0;
  }
  return normalize(FeatureVector::single("lbp", std::move(hist)));
}

FeatureVector ltp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  const Neighborhoods hood = gather(gray, mask, config, "ltp_hist");
  const std::size_t n = static_cast<std::size_t>(config.lbp_neighbors);
  const std::size_t patterns = std::size_t{1} << n;
  const double theta = config.ltp_theta;
  std::vector<double> hist(2 * patterns, 0.0);
  for (std::size_t i = 0; i < hood.centers.size(); ++i) {
    std::uint32_t upper = 0;
    std::uint32_t lower = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = hood.neighbors[i * n + k] - hood.centers[i];
      if (d > theta + kTie) upper |= 1u << k;
      if (d < -theta - kTie) lower |= 1u << k;
    }
    hist[upper] += 1.0;
    hist[patterns + lower] += 1.0;
  }
  return normalize(FeatureVector::single("ltp", std::move(hist)));
}

FeatureVector clbp_hist(const ImageBuffer& gray, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  const Neighborhoods hood = gather(gray, mask, config, "clbp_hist");
  const std::size_t n = static_cast<std::size_t>(config.lbp_neighbors);
  const std::size_t patterns = std::size_t{1} << n;

  double gray_sum = 0.0;
  std::size_t gray_count = 0;
  for (int y = 0; y < gray.height(); ++y) {
    for (int x = 0; x < gray.width(); ++x) {
      if (!mask.at(x, y)) continue;
      gray_sum += gray.at(x, y);
      ++gray_count;
    }
  }
  const double mean_gray = gray_sum / static_cast<double>(gray_count);

  double magnitude_threshold = mean_gray;
  if (config.clbp_threshold == ClbpThreshold::MagnitudeMean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < hood.centers.size(); ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        sum += std::abs(hood.neighbors[i * n + k] - hood.centers[i]);
      }
    }
    magnitude_threshold = sum / static_cast<double>(hood.neighbors.size());
  }

  std::vector<double> hist(2 * patterns + 2, 0.0);
  for (std::size_t i = 0; i < hood.centers.size(); ++i) {
    std::uint32_t sign = 0;
    std::uint32_t magnitude = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = hood.neighbors[i * n + k] - hood.centers[i];
      if (d >= -kTie) sign |= 1u << k;
      if (std::abs(d) >= magnitude_threshold) magnitude |= 1u << k;
    }
    hist[sign] += 1.0;
    hist[patterns + magnitude] += 1.0;
    hist[2 * patterns + (hood.centers[i] >= mean_gray ? 1 : 0)] += 1.0;
  }
  return normalize(FeatureVector::single("clbp", std::move(hist)));
}

}  // namespace fruitscan
