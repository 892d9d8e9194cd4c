#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fruitscan/error.hpp"
#include "fruitscan/imaging.hpp"

namespace fruitscan {

namespace {

enum class Container { Png, Jpeg };

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Decode, "cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Container sniff(const std::vector<std::uint8_t>& bytes,
                const std::filesystem::path& path) {
  static constexpr std::array<std::uint8_t, 8> kPngMagic{0x89, 'P', 'N', 'G',
                                                          '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= kPngMagic.size() &&
      std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return Container::Png;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) {
    return Container::Jpeg;
  }
  fail(ErrorKind::Format, "unsupported image format (expected PNG or JPEG): " +
                              path.string());
}

// libjpeg pads a truncated stream with a fake EOI and only warns, so a
// missing terminator has to be detected up front. Same for PNG's IEND.
bool has_terminator(const std::vector<std::uint8_t>& bytes, Container kind) {
  if (kind == Container::Png) {
    static constexpr std::array<std::uint8_t, 4> kIend{'I', 'E', 'N', 'D'};
    const auto tail_begin = bytes.size() > 64 ? bytes.end() - 64 : bytes.begin();
    return std::search(tail_begin, bytes.end(), kIend.begin(), kIend.end()) !=
           bytes.end();
  }
  for (std::size_t i = bytes.size(); i-- > 3;) {
    if (bytes[i - 1] == 0xff && bytes[i] == 0xd9) return true;
  }
  return false;
}

void write_file(const std::vector<uchar>& encoded,
                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write file: " + path.string());
  out.write(reinterpret_cast<const char*>(encoded.data()),
            static_cast<std::streamsize>(encoded.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace

ImageBuffer load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::Decode, "image file does not exist: " + path.string());
  }
  const auto bytes = read_file(path);
  const Container kind = sniff(bytes, path);
  if (!has_terminator(bytes, kind)) {
    fail(ErrorKind::Decode, "truncated image file: " + path.string());
  }

  cv::Mat bgr;
  try {
    bgr = cv::imdecode(bytes, cv::IMREAD_COLOR | cv::IMREAD_IGNORE_ORIENTATION);
  } catch (const cv::Exception& e) {
    fail(ErrorKind::Decode, "failed to decode " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) fail(ErrorKind::Decode, "failed to decode " + path.string());

  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  std::vector<std::uint8_t> data(rgb.total() * 3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + static_cast<std::size_t>(rgb.cols) * 3,
              data.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return ImageBuffer::rgb8(rgb.cols, rgb.rows, std::move(data));
}

void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  require(img.space() == ColorSpace::Rgb8 || img.space() == ColorSpace::Gray8,
          "save_png expects an RGB8 or GRAY8 image");
  const auto src = img.bytes();
  cv::Mat mat;
  if (img.space() == ColorSpace::Gray8) {
    mat = cv::Mat(img.height(), img.width(), CV_8UC1,
                  const_cast<std::uint8_t*>(src.data()))
              .clone();
  } else {
    cv::Mat rgb(img.height(), img.width(), CV_8UC3,
                const_cast<std::uint8_t*>(src.data()));
    cv::cvtColor(rgb, mat, cv::COLOR_RGB2BGR);
  }
  std::vector<uchar> encoded;
  if (!cv::imencode(".png", mat, encoded)) {
    fail(ErrorKind::Io, "PNG encoding failed for " + path.string());
  }
  write_file(encoded, path);
}

void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint8_t> gray(mask.data.size());
  std::transform(mask.data.begin(), mask.data.end(), gray.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  save_png(ImageBuffer::gray8(mask.width, mask.height, std::move(gray)), path);
}

Mask load_mask_png(const std::filesystem::path& path) {
  const ImageBuffer img = load_image(path);
  Mask mask = Mask::filled(img.width(), img.height(), false);
  const auto src = img.bytes();
  for (std::size_t p = 0; p < mask.data.size(); ++p) {
    mask.data[p] = src[3 * p] > 127 ? 1 : 0;
  }
  return mask;
}

}  // namespace fruitscan
