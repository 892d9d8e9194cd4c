#include <doctest.h>

#include <fstream>
#include <random>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fruitscan/imaging.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fruitscan;
using testing::error_kind;

namespace {

ImageBuffer solid_rgb(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> px;
  for (int i = 0; i < w * h; ++i) px.insert(px.end(), {r, g, b});
  return ImageBuffer::rgb8(w, h, std::move(px));
}

void write_bytes(const std::filesystem::path& p, const std::vector<uchar>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("image buffer invariants") {
  CHECK(error_kind([] { ImageBuffer::rgb8(2, 2, std::vector<std::uint8_t>(11)); }) ==
        ErrorKind::Precondition);
  CHECK(error_kind([] { ImageBuffer::hsv(1, 1, {400.0, 0.5, 0.5}); }) == ErrorKind::Precondition);
  CHECK(error_kind([] { ImageBuffer::lab(1, 1, {101.0, 0.0, 0.0}); }) == ErrorKind::Precondition);
  const auto img = ImageBuffer::gray8(3, 2, std::vector<std::uint8_t>(6, 7));
  CHECK(img.channels() == 1);
  CHECK(img.pixel_count() == 6);
  CHECK(error_kind([&] { (void)img.reals(); }) == ErrorKind::Precondition);
}

TEST_CASE("load_image decodes a 2x2 red PNG and drops alpha") {
  testing::TempDir dir;
  cv::Mat bgr(2, 2, CV_8UC3, cv::Scalar(0, 0, 255));
  std::vector<uchar> png;
  REQUIRE(cv::imencode(".png", bgr, png));
  write_bytes(dir / "red.png", png);
  const ImageBuffer img = load_image(dir / "red.png");
  CHECK(img == solid_rgb(2, 2, 255, 0, 0));

  cv::Mat bgra(2, 2, CV_8UC4, cv::Scalar(0, 255, 0, 10));
  REQUIRE(cv::imencode(".png", bgra, png));
  write_bytes(dir / "alpha.png", png);
  CHECK(load_image(dir / "alpha.png") == solid_rgb(2, 2, 0, 255, 0));
}

TEST_CASE("gray PNG is expanded to three channels") {
  testing::TempDir dir;
  save_png(ImageBuffer::gray8(2, 1, {10, 200}), dir / "g.png");
  CHECK(load_image(dir / "g.png") == ImageBuffer::rgb8(2, 1, {10, 10, 10, 200, 200, 200}));
}

TEST_CASE("load_image error paths") {
  testing::TempDir dir;
  CHECK(error_kind([&] { load_image(dir / "missing.png"); }) == ErrorKind::Decode);

  write_bytes(dir / "note.txt", {'h', 'e', 'l', 'l', 'o'});
  CHECK(error_kind([&] { load_image(dir / "note.txt"); }) == ErrorKind::Format);

  cv::Mat bgr(16, 16, CV_8UC3, cv::Scalar(10, 20, 30));
  std::vector<uchar> bytes;
  REQUIRE(cv::imencode(".png", bgr, bytes));
  bytes.resize(bytes.size() / 2);
  write_bytes(dir / "cut.png", bytes);
  CHECK(error_kind([&] { load_image(dir / "cut.png"); }) == ErrorKind::Decode);
  CHECK(testing::error_message([&] { load_image(dir / "cut.png"); }).find("cut.png") !=
        std::string::npos);

  REQUIRE(cv::imencode(".jpg", bgr, bytes));
  bytes.resize(bytes.size() - 40);
  write_bytes(dir / "cut.jpg", bytes);
  CHECK(error_kind([&] { load_image(dir / "cut.jpg"); }) == ErrorKind::Decode);
}

TEST_CASE("8x8 gray ramp survives a quality-95 JPEG round trip within 3") {
  testing::TempDir dir;
  cv::Mat bgr(8, 8, CV_8UC3);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      const auto v = static_cast<uchar>(16 * x + 8 * y);
      bgr.at<cv::Vec3b>(y, x) = {v, v, v};
    }
  }
  std::vector<uchar> jpeg;
  REQUIRE(cv::imencode(".jpg", bgr, jpeg, {cv::IMWRITE_JPEG_QUALITY, 95}));
  write_bytes(dir / "ramp.jpg", jpeg);
  const ImageBuffer img = load_image(dir / "ramp.jpg");
  REQUIRE(img.width() == 8);
  REQUIRE(img.height() == 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      for (int c = 0; c < 3; ++c) CHECK(std::abs(img.at(x, y, c) - (16 * x + 8 * y)) <= 3);
    }
  }
}

TEST_CASE("rgb_to_lab reference values") {
  const auto lab = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return rgb_to_lab(ImageBuffer::rgb8(1, 1, {r, g, b}));
  };
  auto white = lab(255, 255, 255);
  CHECK(std::abs(white.at(0, 0, 0) - 100.0) < 1e-2);
  CHECK(std::abs(white.at(0, 0, 1)) < 1e-2);
  CHECK(std::abs(white.at(0, 0, 2)) < 1e-2);
  auto black = lab(0, 0, 0);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(black.at(0, 0, c)) < 1e-2);
  auto red = lab(255, 0, 0);
  CHECK(std::abs(red.at(0, 0, 0) - 53.24) < 0.1);
  CHECK(std::abs(red.at(0, 0, 1) - 80.09) < 0.1);
  CHECK(std::abs(red.at(0, 0, 2) - 67.20) < 0.1);
  CHECK(error_kind([] { rgb_to_lab(ImageBuffer::gray8(1, 1, {0})); }) == ErrorKind::Precondition);
}

TEST_CASE("rgb_to_lab inverts within one level over a 16^3 grid") {
  std::vector<std::uint8_t> px;
  for (int r = 0; r < 16; ++r) {
    for (int g = 0; g < 16; ++g) {
      for (int b = 0; b < 16; ++b) {
        px.insert(px.end(), {static_cast<std::uint8_t>(r * 17), static_cast<std::uint8_t>(g * 17),
                             static_cast<std::uint8_t>(b * 17)});
      }
    }
  }
  const auto rgb = ImageBuffer::rgb8(16 * 16, 16, px);
  const auto lab = rgb_to_lab(rgb);
  int worst = 0;
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const auto back = oracle::lab_to_srgb(lab.at(x, y, 0), lab.at(x, y, 1), lab.at(x, y, 2));
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst, std::abs(back[c] - static_cast<int>(rgb.at(x, y, c))));
      }
    }
  }
  CHECK(worst <= 1);
}

TEST_CASE("rgb_to_hsv hexcone values") {
  const auto hsv = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return rgb_to_hsv(ImageBuffer::rgb8(1, 1, {r, g, b}));
  };
  auto red = hsv(255, 0, 0);
  CHECK(red.at(0, 0, 0) == 0.0);
  CHECK(red.at(0, 0, 1) == 1.0);
  CHECK(red.at(0, 0, 2) == 1.0);
  auto gray = hsv(128, 128, 128);
  CHECK(gray.at(0, 0, 0) == 0.0);
  CHECK(gray.at(0, 0, 1) == 0.0);
  CHECK(gray.at(0, 0, 2) == doctest::Approx(128.0 / 255.0));
  auto azure = hsv(0, 128, 255);
  CHECK(std::abs(azure.at(0, 0, 0) - 209.88) < 0.1);
  CHECK(azure.at(0, 0, 1) == 1.0);
  CHECK(azure.at(0, 0, 2) == 1.0);
}

TEST_CASE("rgb_to_gray values and monotonicity") {
  const auto gray = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return rgb_to_gray(ImageBuffer::rgb8(1, 1, {r, g, b})).at(0, 0);
  };
  CHECK(gray(255, 255, 255) == 255);
  CHECK(gray(255, 0, 0) == 76);
  CHECK(gray(0, 0, 0) == 0);
  std::mt19937 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const int r = rng() % 256, g = rng() % 256, b = rng() % 256;
    const int r2 = r + rng() % (256 - r), g2 = g + rng() % (256 - g), b2 = b + rng() % (256 - b);
    CHECK(gray(r, g, b) <= gray(r2, g2, b2));
  }
}

TEST_CASE("quantize_uniform examples") {
  const auto q = [](std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return quantize_uniform(ImageBuffer::rgb8(1, 1, {r, g, b}), 4);
  };
  CHECK(q(255, 255, 255).indices[0] == 63);
  CHECK(q(0, 0, 0).indices[0] == 0);
  CHECK(q(100, 200, 50).indices[0] == 28);
  CHECK(q(0, 0, 0).bins == 64);
  CHECK(error_kind([] { quantize_uniform(ImageBuffer::rgb8(1, 1, {0, 0, 0}), 0); }) ==
        ErrorKind::Precondition);
}

TEST_CASE("quantize_uniform is total and idempotent on bin representatives") {
  std::mt19937 rng(9);
  const auto img = oracle::random_rgb(rng, 20, 15);
  for (int levels : {1, 2, 3, 4, 7}) {
    const auto q = quantize_uniform(img, levels);
    REQUIRE(q.indices.size() == img.pixel_count());
    for (auto i : q.indices) CHECK(i < q.bins);
    // Re-quantizing each bin's lowest representative lands in the same bin.
    std::vector<std::uint8_t> reps;
    const auto n = static_cast<std::uint32_t>(levels);
    for (auto i : q.indices) {
      const std::uint32_t c0 = i / (n * n), c1 = (i / n) % n, c2 = i % n;
      for (auto c : {c0, c1, c2}) {
        reps.push_back(static_cast<std::uint8_t>((c * 256 + n - 1) / n));
      }
    }
    const auto again = quantize_uniform(ImageBuffer::rgb8(img.width(), img.height(), reps), levels);
    CHECK(again.indices == q.indices);
  }
}

TEST_CASE("transforms preserve dimensions") {
  std::mt19937 rng(3);
  const auto img = oracle::random_rgb(rng, 7, 5);
  for (const auto& out : {rgb_to_lab(img), rgb_to_hsv(img), rgb_to_gray(img)}) {
    CHECK(out.width() == 7);
    CHECK(out.height() == 5);
  }
  const auto q = quantize_uniform(rgb_to_hsv(img), 3);
  CHECK(q.width == 7);
  CHECK(q.height == 5);
}

TEST_CASE("mask PNG round trip") {
  testing::TempDir dir;
  Mask m = Mask::filled(3, 2, false);
  m.data = {1, 0, 1, 0, 0, 1};
  save_mask_png(m, dir / "m.png");
  CHECK(load_mask_png(dir / "m.png") == m);
}

}  // TEST_SUITE
