#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fruitscan/descriptors.hpp"
#include "fruitscan/error.hpp"

namespace fruitscan {

namespace {

void check_region(const ImageBuffer& img, const Mask& mask, const char* op) {
  require(img.space() == ColorSpace::Rgb8, std::string(op) + " expects an RGB8 image");
  require(mask.width == img.width() && mask.height == img.height() &&
              mask.data.size() == img.pixel_count(),
          std::string(op) + ": mask dimensions do not match the image");
  if (mask.count() == 0) fail(ErrorKind::EmptyRegion, std::string(op) + ": empty mask");
}

std::size_t index_of(int width, int x, int y) {
  return static_cast<std::size_t>(y) * width + x;
}

// Box blur restricted to masked pixels; pixels outside the mask are copied.
ImageBuffer masked_box_blur(const ImageBuffer& img, const Mask& mask, int radius) {
  if (radius == 0) return img;
  const auto src = img.bytes();
  std::vector<std::uint8_t> out(src.begin(), src.end());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (!mask.at(x, y)) continue;
      std::array<double, 3> sum{0.0, 0.0, 0.0};
      int n = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          if (!mask.contains(x + dx, y + dy)) continue;
          for (int c = 0; c < 3; ++c) sum[c] += img.at(x + dx, y + dy, c);
          ++n;
        }
      }
      for (int c = 0; c < 3; ++c) {
        out[index_of(img.width(), x, y) * 3 + c] =
            static_cast<std::uint8_t>(std::lround(sum[c] / n));
      }
    }
  }
  return ImageBuffer::rgb8(img.width(), img.height(), std::move(out));
}

constexpr std::array<std::array<int, 2>, 8> kEightNeighbors{{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};

}  // namespace

FeatureVector gch(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  check_region(img, mask, "gch");
  const QuantizedImage q = quantize_uniform(img, config.gch_levels);
  std::vector<double> hist(q.bins, 0.0);
  for (std::size_t p = 0; p < q.indices.size(); ++p) {
    if (mask.data[p]) hist[q.indices[p]] += 1.0;
  }
  return normalize(FeatureVector::single("gch", std::move(hist)));
}

FeatureVector coherence_vector(const QuantizedImage& q, const Mask& mask, double tau) {
  require(mask.width == q.width && mask.height == q.height &&
              mask.data.size() == q.indices.size(),
          "coherence_vector: mask dimensions do not match the image");
  const std::size_t masked = mask.count();
  if (masked == 0) fail(ErrorKind::EmptyRegion, "ccv: empty mask");
  const auto threshold =
      static_cast<std::size_t>(std::ceil(tau * static_cast<double>(masked)));

  std::vector<double> hist(2 * static_cast<std::size_t>(q.bins), 0.0);
  std::vector<std::uint8_t> visited(q.indices.size(), 0);
  std::vector<std::size_t> stack;
  std::vector<std::size_t> component;
  for (int y = 0; y < q.height; ++y) {
    for (int x = 0; x < q.width; ++x) {
      const std::size_t start = index_of(q.width, x, y);
      if (!mask.data[start] || visited[start]) continue;
      const std::uint32_t bin = q.indices[start];
      component.clear();
      stack.assign(1, start);
      visited[start] = 1;
      while (!stack.empty()) {
        const std::size_t p = stack.back();
        stack.pop_back();
        component.push_back(p);
        const int px = static_cast<int>(p % q.width);
        const int py = static_cast<int>(p / q.width);
        for (const auto& [dx, dy] : kEightNeighbors) {
          const int nx = px + dx;
          const int ny = py + dy;
          if (!mask.contains(nx, ny)) continue;
          const std::size_t n = index_of(q.width, nx, ny);
          if (visited[n] || q.indices[n] != bin) continue;
          visited[n] = 1;
          stack.push_back(n);
        }
      }
      const bool coherent = component.size() >= threshold;
      hist[(coherent ? 0 : q.bins) + bin] += static_cast<double>(component.size());
    }
  }
  return normalize(FeatureVector::single("ccv", std::move(hist)));
}

FeatureVector ccv(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  check_region(img, mask, "ccv");
  const ImageBuffer blurred = masked_box_blur(img, mask, config.ccv_blur_radius);
  return coherence_vector(quantize_uniform(blurred, config.ccv_levels), mask, config.ccv_tau);
}

namespace {

std::uint32_t cdh_color_bin(double l, double a, double b) {
  const int lb = std::clamp(static_cast<int>(std::floor(l / 100.0 * 10.0)), 0, 9);
  const int ab = std::clamp(static_cast<int>(std::floor((a + 128.0) / 256.0 * 3.0)), 0, 2);
  const int bb = std::clamp(static_cast<int>(std::floor((b + 128.0) / 256.0 * 3.0)), 0, 2);
  return static_cast<std::uint32_t>(lb * 9 + ab * 3 + bb);
}

// Edge orientation from the multichannel (Di Zenzo) structure of Sobel
// gradients. Angle of the edge line, counterclockwise from +x with the
// image y axis pointing down; flat pixels land in bin 0.
std::uint32_t cdh_orientation_bin(double gxx, double gyy, double gxy, int bins) {
  if (gxx + gyy <= 0.0) return 0;
  const double gradient = 0.5 * std::atan2(2.0 * gxy, gxx - gyy);  // image coords
  double edge = (-gradient + std::numbers::pi / 2.0) * 180.0 / std::numbers::pi;
  edge = std::fmod(edge, 180.0);
  if (edge < 0.0) edge += 180.0;
  const int bin = static_cast<int>(std::floor(edge / (180.0 / bins)));
  return static_cast<std::uint32_t>(std::clamp(bin, 0, bins - 1));
}

}  // namespace

FeatureVector cdh(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  check_region(img, mask, "cdh");
  const int w = img.width();
  const int h = img.height();
  const ImageBuffer lab = rgb_to_lab(img);
  const auto lv = lab.reals();
  const auto lab_at = [&](int x, int y, int c) { return lv[index_of(w, x, y) * 3 + c]; };

  std::vector<std::uint32_t> color(img.pixel_count());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      color[index_of(w, x, y)] = cdh_color_bin(lab_at(x, y, 0), lab_at(x, y, 1), lab_at(x, y, 2));
    }
  }

  // Orientation is defined where the full 3x3 Sobel support is masked.
  constexpr std::uint32_t kNoOrientation = 0xffffffffu;
  std::vector<std::uint32_t> orientation(img.pixel_count(), kNoOrientation);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      bool supported = true;
      for (int dy = -1; dy <= 1 && supported; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!mask.at(x + dx, y + dy)) {
            supported = false;
            break;
          }
        }
      }
      if (!supported) continue;
      double gxx = 0.0, gyy = 0.0, gxy = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gx = (lab_at(x + 1, y - 1, c) + 2.0 * lab_at(x + 1, y, c) +
                           lab_at(x + 1, y + 1, c)) -
                          (lab_at(x - 1, y - 1, c) + 2.0 * lab_at(x - 1, y, c) +
                           lab_at(x - 1, y + 1, c));
        const double gy = (lab_at(x - 1, y + 1, c) + 2.0 * lab_at(x, y + 1, c) +
                           lab_at(x + 1, y + 1, c)) -
                          (lab_at(x - 1, y - 1, c) + 2.0 * lab_at(x, y - 1, c) +
                           lab_at(x + 1, y - 1, c));
        gxx += gx * gx;
        gyy += gy * gy;
        gxy += gx * gy;
      }
      orientation[index_of(w, x, y)] =
          cdh_orientation_bin(gxx, gyy, gxy, config.cdh_orientation_bins);
    }
  }

  const std::size_t color_bins = static_cast<std::size_t>(config.cdh_color_bins);
  std::vector<double> hist(color_bins + static_cast<std::size_t>(config.cdh_orientation_bins), 0.0);
  const int d = config.cdh_distance;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t center = index_of(w, x, y);
      if (orientation[center] == kNoOrientation) continue;
      bool complete = true;
      for (const auto& [dx, dy] : kEightNeighbors) {
        const int nx = x + d * dx;
        const int ny = y + d * dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h ||
            orientation[index_of(w, nx, ny)] == kNoOrientation) {
          complete = false;
          break;
        }
      }
      if (!complete) continue;
      for (const auto& [dx, dy] : kEightNeighbors) {
        const int nx = x + d * dx;
        const int ny = y + d * dy;
        const std::size_t n = index_of(w, nx, ny);
        const double dl = lab_at(x, y, 0) - lab_at(nx, ny, 0);
        const double da = lab_at(x, y, 1) - lab_at(nx, ny, 1);
        const double db = lab_at(x, y, 2) - lab_at(nx, ny, 2);
        const double diff = std::sqrt(dl * dl + da * da + db * db);
        if (orientation[n] == orientation[center]) hist[color[center]] += diff;
        if (color[n] == color[center]) hist[color_bins + orientation[center]] += diff;
      }
    }
  }
  return normalize(FeatureVector::single("cdh", std::move(hist)));
}

namespace {

std::uint32_t seh_bin(double h, double s, double v) {
  const int hb = std::clamp(static_cast<int>(std::floor(h / 45.0)), 0, 7);
  const int sb = std::clamp(static_cast<int>(std::floor(s * 3.0)), 0, 2);
  const int vb = std::clamp(static_cast<int>(std::floor(v * 3.0)), 0, 2);
  return static_cast<std::uint32_t>(hb * 9 + sb * 3 + vb);
}

// Cells of a 2x2 block: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right.
constexpr std::array<std::array<int, 4>, 5> kStructureElements{{
    {0, 1, -1, -1},  // horizontal
    {0, 2, -1, -1},  // vertical
    {2, 1, -1, -1},  // 45 degrees
    {0, 3, -1, -1},  // 135 degrees
    {0, 1, 2, 3},    // all four
}};

}  // namespace

FeatureVector seh(const ImageBuffer& img, const Mask& mask, const DescriptorConfig& config) {
  config.validate();
  check_region(img, mask, "seh");
  const ImageBuffer hsv = rgb_to_hsv(img);
  const int w = img.width();
  std::vector<std::uint32_t> q(img.pixel_count());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < w; ++x) {
      q[index_of(w, x, y)] = seh_bin(hsv.at(x, y, 0), hsv.at(x, y, 1), hsv.at(x, y, 2));
    }
  }

  std::vector<double> hist(static_cast<std::size_t>(config.seh_bins), 0.0);
  for (int y = 0; y + 1 < img.height(); y += 2) {
    for (int x = 0; x + 1 < w; x += 2) {
      const std::array<std::size_t, 4> cell{index_of(w, x, y), index_of(w, x + 1, y),
                                            index_of(w, x, y + 1), index_of(w, x + 1, y + 1)};
      for (const auto& element : kStructureElements) {
        const std::size_t first = cell[static_cast<std::size_t>(element[0])];
        bool match = mask.data[first] != 0;
        for (int slot = 1; slot < 4 && match && element[slot] >= 0; ++slot) {
          const std::size_t p = cell[static_cast<std::size_t>(element[slot])];
          match = mask.data[p] != 0 && q[p] == q[first];
        }
        if (match) hist[q[first]] += 1.0;
      }
    }
  }
  return normalize(FeatureVector::single("seh", std::move(hist)));
}

}  // namespace fruitscan
