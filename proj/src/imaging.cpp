#include "fruitscan/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fruitscan/error.hpp"

namespace fruitscan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Decode: return "decode";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::Range: return "range";
    case ErrorKind::SelectionFailed: return "selection-failed";
    case ErrorKind::EmptyRegion: return "empty-region";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::DegenerateTraining: return "degenerate-training";
    case ErrorKind::Mismatch: return "mismatch";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::Version: return "version";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::InfeasibleSplit: return "infeasible-split";
  }
  return "unknown";
}

ImageBuffer::ImageBuffer(int width, int height, ColorSpace space,
                         std::vector<std::uint8_t> bytes,
                         std::vector<double> reals)
    : width_(width),
      height_(height),
      space_(space),
      bytes_(std::move(bytes)),
      reals_(std::move(reals)) {
  require(width >= 0 && height >= 0, "image dimensions must be non-negative");
  const std::size_t expected = pixel_count() * channel_count(space);
  const std::size_t actual =
      is_integer_space(space) ? bytes_.size() : reals_.size();
  if (actual != expected) {
    fail(ErrorKind::Precondition,
         "image data length " + std::to_string(actual) + " does not match " +
             std::to_string(width) + "x" + std::to_string(height) + "x" +
             std::to_string(channel_count(space)));
  }
}

ImageBuffer ImageBuffer::rgb8(int width, int height, std::vector<std::uint8_t> data) {
  return ImageBuffer(width, height, ColorSpace::Rgb8, std::move(data), {});
}

ImageBuffer ImageBuffer::gray8(int width, int height, std::vector<std::uint8_t> data) {
  return ImageBuffer(width, height, ColorSpace::Gray8, std::move(data), {});
}

ImageBuffer ImageBuffer::lab(int width, int height, std::vector<double> data) {
  // Float round-off can put white a hair above 100.
  for (std::size_t i = 0; i < data.size(); i += 3) {
    require(data[i] >= -1e-9 && data[i] <= 100.0 + 1e-9, "LAB L* must lie in [0, 100]");
  }
  return ImageBuffer(width, height, ColorSpace::Lab, {}, std::move(data));
}

ImageBuffer ImageBuffer::hsv(int width, int height, std::vector<double> data) {
  for (std::size_t i = 0; i + 2 < data.size(); i += 3) {
    require(data[i] >= 0.0 && data[i] < 360.0, "HSV hue must lie in [0, 360)");
    require(data[i + 1] >= 0.0 && data[i + 1] <= 1.0 && data[i + 2] >= 0.0 && data[i + 2] <= 1.0,
            "HSV saturation and value must lie in [0, 1]");
  }
  return ImageBuffer(width, height, ColorSpace::Hsv, {}, std::move(data));
}

std::span<const std::uint8_t> ImageBuffer::bytes() const {
  require(is_integer_space(space_), "image is not an 8-bit color space");
  return bytes_;
}

std::span<const double> ImageBuffer::reals() const {
  require(!is_integer_space(space_), "image is not a real-valued color space");
  return reals_;
}

Mask Mask::filled(int width, int height, bool value) {
  return Mask{width, height,
              std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height,
                                        value ? 1 : 0)};
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1));
}

namespace {

void require_rgb(const ImageBuffer& img, const char* op) {
  require(img.space() == ColorSpace::Rgb8,
          std::string(op) + " expects an RGB8 image");
}

double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t)
                                   : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// D65 reference white.
constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.00000;
constexpr double kWhiteZ = 1.08883;

}  // namespace

Lab srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);

  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

ImageBuffer rgb_to_lab(const ImageBuffer& img) {
  require_rgb(img, "rgb_to_lab");
  const auto src = img.bytes();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const Lab lab = srgb_to_lab(src[i], src[i + 1], src[i + 2]);
    out[i] = std::clamp(lab.l, 0.0, 100.0);
    out[i + 1] = lab.a;
    out[i + 2] = lab.b;
  }
  return ImageBuffer::lab(img.width(), img.height(), std::move(out));
}

ImageBuffer rgb_to_hsv(const ImageBuffer& img) {
  require_rgb(img, "rgb_to_hsv");
  const auto src = img.bytes();
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const double r = src[i] / 255.0;
    const double g = src[i + 1] / 255.0;
    const double b = src[i + 2] / 255.0;
    const double max = std::max({r, g, b});
    const double min = std::min({r, g, b});
    const double chroma = max - min;

    double h = 0.0;
    if (chroma > 0.0) {
      if (max == r) {
        h = 60.0 * std::fmod((g - b) / chroma, 6.0);
      } else if (max == g) {
        h = 60.0 * ((b - r) / chroma + 2.0);
      } else {
        h = 60.0 * ((r - g) / chroma + 4.0);
      }
      if (h < 0.0) h += 360.0;
      if (h >= 360.0) h -= 360.0;
    }
    out[i] = h;
    out[i + 1] = max > 0.0 ? chroma / max : 0.0;
    out[i + 2] = max;
  }
  return ImageBuffer::hsv(img.width(), img.height(), std::move(out));
}

ImageBuffer rgb_to_gray(const ImageBuffer& img) {
  require_rgb(img, "rgb_to_gray");
  const auto src = img.bytes();
  std::vector<std::uint8_t> out(img.pixel_count());
  for (std::size_t p = 0; p < out.size(); ++p) {
    const double y =
        0.299 * src[3 * p] + 0.587 * src[3 * p + 1] + 0.114 * src[3 * p + 2];
    out[p] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return ImageBuffer::gray8(img.width(), img.height(), std::move(out));
}

QuantizedImage quantize_uniform(const ImageBuffer& img, int levels) {
  require(levels >= 1, "quantize_uniform: levels_per_channel must be >= 1");
  require(img.channels() == 3, "quantize_uniform: expects a 3-channel image");

  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> range{256.0, 256.0, 256.0};
  switch (img.space()) {
    case ColorSpace::Hsv:
      range = {360.0, 1.0, 1.0};
      break;
    case ColorSpace::Lab:
      lo = {0.0, -128.0, -128.0};
      range = {100.0, 256.0, 256.0};
      break;
    default:
      break;
  }

  QuantizedImage q;
  q.width = img.width();
  q.height = img.height();
  q.bins = static_cast<std::uint32_t>(levels) * levels * levels;
  q.indices.resize(img.pixel_count());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      std::uint32_t index = 0;
      for (int c = 0; c < 3; ++c) {
        const double t = (img.at(x, y, c) - lo[c]) / range[c] * levels;
        const int level = std::clamp(static_cast<int>(std::floor(t)), 0, levels - 1);
        index = index * levels + level;
      }
      q.indices[static_cast<std::size_t>(y) * q.width + x] = index;
    }
  }
  return q;
}

}  // namespace fruitscan
