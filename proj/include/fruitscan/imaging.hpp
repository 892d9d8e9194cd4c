#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fruitscan {

enum class ColorSpace { Rgb8, Lab, Hsv, Gray8 };

constexpr int channel_count(ColorSpace space) {
  return space == ColorSpace::Gray8 ? 1 : 3;
}

constexpr bool is_integer_space(ColorSpace space) {
  return space == ColorSpace::Rgb8 || space == ColorSpace::Gray8;
}

// Row-major, channel-interleaved raster. RGB8/GRAY8 pixels are stored as
// bytes; LAB/HSV as doubles. Immutable once constructed.
class ImageBuffer {
 public:
  ImageBuffer() = default;

  static ImageBuffer rgb8(int width, int height, std::vector<std::uint8_t> data);
  static ImageBuffer gray8(int width, int height, std::vector<std::uint8_t> data);
  static ImageBuffer lab(int width, int height, std::vector<double> data);
  static ImageBuffer hsv(int width, int height, std::vector<double> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  ColorSpace space() const noexcept { return space_; }
  int channels() const noexcept { return channel_count(space_); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  // Throws Precondition when the buffer is not an 8-bit (resp. real) space.
  std::span<const std::uint8_t> bytes() const;
  std::span<const double> reals() const;

  // Channel value at (x, y) regardless of storage type.
  double at(int x, int y, int c = 0) const {
    const std::size_t i =
        (static_cast<std::size_t>(y) * width_ + x) * channels() + c;
    return is_integer_space(space_) ? static_cast<double>(bytes_[i]) : reals_[i];
  }

  bool operator==(const ImageBuffer&) const = default;

 private:
  ImageBuffer(int width, int height, ColorSpace space,
              std::vector<std::uint8_t> bytes, std::vector<double> reals);

  int width_ = 0;
  int height_ = 0;
  ColorSpace space_ = ColorSpace::Rgb8;
  std::vector<std::uint8_t> bytes_;
  std::vector<double> reals_;
};

// Per-pixel boolean region, same geometry as the image it selects from.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 0 or 1, row-major

  static Mask filled(int width, int height, bool value);

  bool at(int x, int y) const {
    return data[static_cast<std::size_t>(y) * width + x] != 0;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height && at(x, y);
  }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;
};

struct QuantizedImage {
  int width = 0;
  int height = 0;
  std::uint32_t bins = 0;
  std::vector<std::uint32_t> indices;

  std::uint32_t at(int x, int y) const {
    return indices[static_cast<std::size_t>(y) * width + x];
  }
};

// PNG or JPEG from disk, always returned as RGB8 (alpha dropped, gray
// expanded to three channels).
ImageBuffer load_image(const std::filesystem::path& path);

// 8-bit PNG writers; used for masks and overlays.
void save_png(const ImageBuffer& img, const std::filesystem::path& path);
void save_mask_png(const Mask& mask, const std::filesystem::path& path);
Mask load_mask_png(const std::filesystem::path& path);

// sRGB (D65) to CIE L*a*b*.
ImageBuffer rgb_to_lab(const ImageBuffer& img);
// Hexcone HSV with H in degrees [0, 360), S and V in [0, 1].
ImageBuffer rgb_to_hsv(const ImageBuffer& img);
// BT.601 luma, rounded.
ImageBuffer rgb_to_gray(const ImageBuffer& img);

struct Lab {
  double l, a, b;
};
Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Equal-width quantization: floor(v / range * levels) per channel, then
// c0 * levels^2 + c1 * levels + c2. Channel ranges: RGB8 [0,256),
// HSV H [0,360) S,V [0,1], LAB L [0,100] a,b [-128,128).
QuantizedImage quantize_uniform(const ImageBuffer& img, int levels_per_channel);

}  // namespace fruitscan
