#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fruitscan/descriptors.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fruitscan;
using testing::error_kind;

namespace {

ImageBuffer solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  std::vector<std::uint8_t> px;
  for (int i = 0; i < w * h; ++i) px.insert(px.end(), {r, g, b});
  return ImageBuffer::rgb8(w, h, std::move(px));
}

Mask all_of(const ImageBuffer& img) { return Mask::filled(img.width(), img.height(), true); }

// A random blob-ish mask: union of a few disks, always non-empty.
Mask random_mask(std::mt19937& rng, int w, int h) {
  Mask m = Mask::filled(w, h, false);
  std::uniform_real_distribution<double> ux(0, w), uy(0, h), ur(3, std::min(w, h) / 2.0);
  for (int i = 0; i < 3; ++i) {
    const double cx = ux(rng), cy = uy(rng), r = ur(rng);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (std::hypot(x - cx, y - cy) < r) m.data[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }
  m.data[static_cast<std::size_t>(h / 2) * w + w / 2] = 1;
  return m;
}

double block_sum(const FeatureVector& fv, std::size_t b) {
  const auto& block = fv.blocks[b];
  return std::accumulate(fv.values.begin() + static_cast<std::ptrdiff_t>(block.offset),
                         fv.values.begin() + static_cast<std::ptrdiff_t>(block.offset + block.length), 0.0);
}

void check_distribution(const FeatureVector& fv) {
  for (double v : fv.values) CHECK(v >= 0.0);
  for (std::size_t b = 0; b < fv.blocks.size(); ++b) {
    if (fv.blocks[b].degenerate) {
      CHECK(block_sum(fv, b) == 0.0);
    } else {
      CHECK(std::abs(block_sum(fv, b) - 1.0) <= 1e-9);
    }
  }
}

void check_same(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (std::abs(got[i] - want[i]) > 1e-12) {
      FAIL_CHECK("bin " << i << ": " << got[i] << " vs " << want[i]);
      return;
    }
  }
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

TEST_SUITE("descriptors") {

TEST_CASE("descriptor lengths") {
  const DescriptorConfig cfg;
  CHECK(descriptor_length("gch", cfg) == 64);
  CHECK(descriptor_length("ccv", cfg) == 128);
  CHECK(descriptor_length("cdh", cfg) == 108);
  CHECK(descriptor_length("seh", cfg) == 72);
  CHECK(descriptor_length("lbp", cfg) == 256);
  CHECK(descriptor_length("ltp", cfg) == 512);
  CHECK(descriptor_length("clbp", cfg) == 514);
  CHECK(error_kind([&] { descriptor_length("sift", cfg); }) == ErrorKind::Parse);

  std::mt19937 rng(1);
  const auto img = oracle::random_rgb(rng, 12, 12);
  for (const auto& name : descriptor_names()) {
    CHECK(extract(name, img, all_of(img), cfg).size() == descriptor_length(name, cfg));
  }
}

TEST_CASE("config validation") {
  DescriptorConfig cfg;
  cfg.lbp_radius = 0;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Precondition);
  cfg = {};
  cfg.ltp_theta = -1;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Precondition);
  cfg = {};
  cfg.gch_levels = 0;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::Precondition);
}

TEST_CASE("gch examples") {
  const DescriptorConfig cfg;
  const auto red = solid(5, 5, 255, 0, 0);
  const auto fv = gch(red, all_of(red), cfg);
  CHECK(fv.values[48] == 1.0);
  CHECK(std::accumulate(fv.values.begin(), fv.values.end(), 0.0) == 1.0);

  std::vector<std::uint8_t> px;
  for (int i = 0; i < 8; ++i) px.insert(px.end(), 3, static_cast<std::uint8_t>(i % 2 ? 255 : 0));
  const auto bw = ImageBuffer::rgb8(4, 2, px);
  const auto h = gch(bw, all_of(bw), cfg);
  CHECK(h.values[0] == 0.5);
  CHECK(h.values[63] == 0.5);
  CHECK(error_kind([&] { gch(red, Mask::filled(5, 5, false), cfg); }) == ErrorKind::EmptyRegion);
}

TEST_CASE("ccv examples") {
  DescriptorConfig cfg;
  const auto region = solid(10, 10, 30, 200, 90);
  const auto fv = ccv(region, all_of(region), cfg);
  const auto bin = quantize_uniform(region, 4).indices[0];
  CHECK(fv.values[bin] == 1.0);
  for (std::size_t i = 64; i < 128; ++i) CHECK(fv.values[i] == 0.0);

  cfg.ccv_blur_radius = 0;
  std::vector<std::uint8_t> px;
  for (int i = 0; i < 10000; ++i) px.insert(px.end(), {20, 20, 20});
  px[(50 * 100 + 50) * 3] = 250;
  const auto field = ImageBuffer::rgb8(100, 100, px);
  const auto f = ccv(field, all_of(field), cfg);
  const auto odd = quantize_uniform(field, 4).at(50, 50);
  CHECK(f.values[64 + odd] == doctest::Approx(1.0 / 10000));
  CHECK(f.values[0] == doctest::Approx(9999.0 / 10000));
  CHECK(std::accumulate(f.values.begin(), f.values.end(), 0.0) == doctest::Approx(1.0));
}

TEST_CASE("ccv agrees with a union-find oracle") {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    auto img = oracle::random_rgb(rng, 32, 32);
    const int levels = 1 + trial % 3;
    const auto q = quantize_uniform(img, levels);
    const Mask mask = trial % 2 ? random_mask(rng, 32, 32) : all_of(img);
    const double tau = 0.002 * (trial % 5);
    const auto got = coherence_vector(q, mask, tau);
    const auto want = oracle::to_probabilities(oracle::ccv_counts(q.indices, 32, 32, q.bins, mask.data, tau));
    check_same(got.values, want);

    DescriptorConfig cfg;
    cfg.ccv_blur_radius = 0;
    cfg.ccv_levels = levels;
    cfg.ccv_tau = tau;
    CHECK(ccv(img, mask, cfg) == got);
  }
}

TEST_CASE("ccv blur stays inside the mask") {
  std::mt19937 rng(4);
  auto img = oracle::random_rgb(rng, 16, 16);
  const Mask mask = random_mask(rng, 16, 16);
  auto other = img;
  std::vector<std::uint8_t> px(img.bytes().begin(), img.bytes().end());
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i]) px[3 * i] = px[3 * i + 1] = px[3 * i + 2] = 0;
  }
  CHECK(ccv(img, mask, {}) == ccv(ImageBuffer::rgb8(16, 16, px), mask, {}));
}

TEST_CASE("cdh: solid region is degenerate") {
  const auto region = solid(8, 8, 120, 60, 30);
  const auto fv = cdh(region, all_of(region), {});
  CHECK(fv.size() == 108);
  CHECK(fv.blocks[0].degenerate);
  for (double v : fv.values) CHECK(v == 0.0);
}

TEST_CASE("cdh: vertical stripes put the orientation mass on 90 degree edges") {
  // Stripes two columns wide; within a stripe the two columns differ slightly
  // but stay in one color bin, so same-color neighbors carry a difference.
  const std::uint8_t columns[4] = {100, 104, 180, 186};
  std::vector<std::uint8_t> px;
  const int w = 24, h = 12;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) px.insert(px.end(), 3, columns[x % 4]);
  }
  const auto img = ImageBuffer::rgb8(w, h, px);

  // Independent check of the geometry: every column is constant, so the
  // vertical derivative vanishes and each edge line runs at 90 degrees.
  for (int x = 0; x < w; ++x) {
    for (int y = 1; y < h; ++y) REQUIRE(img.at(x, y, 0) == img.at(x, 0, 0));
  }
  const DescriptorConfig cfg;
  const auto expected_bin = static_cast<std::size_t>(90.0 / (180.0 / cfg.cdh_orientation_bins));
  CHECK(expected_bin == 9);

  const auto fv = cdh(img, all_of(img), cfg);
  check_distribution(fv);
  const std::span<const double> orientation(fv.values.data() + 90, 18);
  CHECK(argmax(orientation) == expected_bin);
  double rest = 0;
  for (std::size_t i = 0; i < 18; ++i) {
    if (i != expected_bin) rest += orientation[i];
  }
  CHECK(rest == 0.0);
}

TEST_CASE("seh examples") {
  const auto region = solid(6, 6, 255, 0, 0);
  const auto fv = seh(region, all_of(region), {});
  CHECK(fv.size() == 72);
  CHECK(fv.values[8] == 1.0);  // H 0, S top, V top
  CHECK(!fv.blocks[0].degenerate);

  // Four colors in four distinct HSV bins arranged so that no two pixels of
  // any 2x2 cell agree.
  const std::uint8_t palette[4][3] = {{255, 0, 0}, {255, 255, 0}, {0, 255, 0}, {0, 0, 255}};
  std::vector<std::uint8_t> px;
  const int w = 16, h = 16;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto& c = palette[(x + 2 * y) % 4];
      px.insert(px.end(), c, c + 3);
    }
  }
  const auto noise = ImageBuffer::rgb8(w, h, px);
  const auto q = rgb_to_hsv(noise);
  // Exhaustive scan: any pair in any stride-2 cell that shares a bin?
  int matches = 0;
  for (int y = 0; y + 1 < h; y += 2) {
    for (int x = 0; x + 1 < w; x += 2) {
      const double hues[4] = {q.at(x, y, 0), q.at(x + 1, y, 0), q.at(x, y + 1, 0), q.at(x + 1, y + 1, 0)};
      for (int a = 0; a < 4; ++a) {
        for (int b = a + 1; b < 4; ++b) matches += static_cast<int>(hues[a] / 45) == static_cast<int>(hues[b] / 45);
      }
    }
  }
  REQUIRE(matches == 0);
  const auto degenerate = seh(noise, all_of(noise), {});
  CHECK(degenerate.blocks[0].degenerate);
  for (double v : degenerate.values) CHECK(v == 0.0);
}

TEST_CASE("lbp_code examples") {
  const auto flat = ImageBuffer::gray8(3, 3, std::vector<std::uint8_t>(9, 77));
  CHECK(lbp_code(flat, 1, 1, 8, 1.0) == 255);

  std::vector<std::uint8_t> peak(9, 100);
  peak[4] = 200;
  CHECK(lbp_code(ImageBuffer::gray8(3, 3, peak), 1, 1, 8, 1.0) == 0);

  const auto patch = ImageBuffer::gray8(3, 3, {10, 20, 30, 40, 50, 60, 70, 80, 90});
  const auto nb = oracle::neighborhood(8, 1.0);
  std::uint32_t expect = 0;
  for (int n = 0; n < 8; ++n) {
    if (oracle::interpolate(patch, 1 + nb.ox[n], 1 + nb.oy[n]) >= 50) expect |= 1u << n;
  }
  // East, south-west, south and south-east lie at or above the center.
  CHECK(expect == 0b11100001u);
  CHECK(lbp_code(patch, 1, 1, 8, 1.0) == expect);

  CHECK(error_kind([&] { lbp_code(patch, 0, 1, 8, 1.0); }) == ErrorKind::Range);
  CHECK(error_kind([&] { lbp_code(patch, 1, 1, 8, 2.0); }) == ErrorKind::Range);
}

TEST_CASE("lbp_hist examples") {
  const DescriptorConfig cfg;
  const auto flat = ImageBuffer::gray8(5, 5, std::vector<std::uint8_t>(25, 9));
  const auto fv = lbp_hist(flat, all_of(flat), cfg);
  CHECK(fv.size() == 256);
  CHECK(fv.values[255] == 1.0);

  std::vector<std::uint8_t> px;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) px.push_back((x + y) % 2 ? 255 : 0);
  }
  const auto board = ImageBuffer::gray8(8, 8, px);
  const auto h = lbp_hist(board, all_of(board), cfg);
  check_same(h.values, oracle::lbp(board, nullptr, 8, 1.0));
  check_distribution(h);

  Mask lonely = Mask::filled(5, 5, false);
  lonely.data[12] = 1;
  CHECK(error_kind([&] { lbp_hist(flat, lonely, cfg); }) == ErrorKind::EmptyRegion);
  CHECK(error_kind([&] { lbp_hist(flat, Mask::filled(5, 5, false), cfg); }) == ErrorKind::EmptyRegion);
}

TEST_CASE("ltp_hist examples") {
  const DescriptorConfig cfg;
  const auto flat = ImageBuffer::gray8(4, 4, std::vector<std::uint8_t>(16, 50));
  const auto fv = ltp_hist(flat, all_of(flat), cfg);
  CHECK(fv.size() == 512);
  CHECK(fv.values[0] == 0.5);
  CHECK(fv.values[256] == 0.5);

  std::vector<std::uint8_t> ring(9, 110);
  ring[4] = 100;
  const auto img = ImageBuffer::gray8(3, 3, ring);
  const auto h = ltp_hist(img, all_of(img), cfg);
  CHECK(h.values[255] == 0.5);
  CHECK(h.values[256] == 0.5);
}

TEST_CASE("clbp_hist examples") {
  const DescriptorConfig cfg;
  const auto flat = ImageBuffer::gray8(4, 4, std::vector<std::uint8_t>(16, 50));
  const auto fv = clbp_hist(flat, all_of(flat), cfg);
  CHECK(fv.size() == 514);
  CHECK(fv.values[255] == doctest::Approx(1.0 / 3));
  CHECK(fv.values[256 + 255] == doctest::Approx(1.0 / 3));
  CHECK(fv.values[513] == doctest::Approx(1.0 / 3));
  check_distribution(fv);
}

TEST_CASE("texture histograms match naive oracles on random patches") {
  std::mt19937 rng(31);
  DescriptorConfig cfg;
  DescriptorConfig gray_mean = cfg;
  gray_mean.clbp_threshold = ClbpThreshold::GrayMean;
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = oracle::random_gray(rng, 16, 16);
    const Mask full = all_of(g);
    check_same(lbp_hist(g, full, cfg).values, oracle::lbp(g, nullptr, 8, 1.0));
    check_same(ltp_hist(g, full, cfg).values, oracle::ltp(g, nullptr, 8, 1.0, 5.0));
    check_same(clbp_hist(g, full, cfg).values, oracle::clbp(g, nullptr, 8, 1.0));
    check_same(clbp_hist(g, full, gray_mean).values, oracle::clbp(g, nullptr, 8, 1.0, true));
  }
}

TEST_CASE("texture oracles agree under masks and other geometries") {
  std::mt19937 rng(32);
  const std::pair<int, double> geometries[] = {{8, 1.0}, {8, 2.0}, {4, 1.0}, {12, 1.5}, {16, 2.0}};
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = oracle::random_gray(rng, 20, 20);
    const Mask mask = random_mask(rng, 20, 20);
    const auto [n, r] = geometries[trial % 5];
    DescriptorConfig cfg;
    cfg.lbp_neighbors = n;
    cfg.lbp_radius = r;
    cfg.ltp_theta = trial % 7;
    const auto valid = oracle::lbp(g, &mask, n, r);
    if (std::accumulate(valid.begin(), valid.end(), 0.0) == 0.0) {
      CHECK(error_kind([&] { lbp_hist(g, mask, cfg); }) == ErrorKind::EmptyRegion);
      continue;
    }
    check_same(lbp_hist(g, mask, cfg).values, valid);
    check_same(ltp_hist(g, mask, cfg).values, oracle::ltp(g, &mask, n, r, cfg.ltp_theta));
    check_same(clbp_hist(g, mask, cfg).values, oracle::clbp(g, &mask, n, r));
  }
}

TEST_CASE("outputs are distributions for every descriptor") {
  std::mt19937 rng(41);
  const DescriptorConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = oracle::random_rgb(rng, 24, 24);
    const Mask mask = random_mask(rng, 24, 24);
    for (const auto& name : descriptor_names()) {
      try {
        check_distribution(extract(name, img, mask, cfg));
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::EmptyRegion);
      }
    }
  }
}

TEST_CASE("pixels outside the mask never matter") {
  std::mt19937 rng(43);
  const DescriptorConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    const auto img = oracle::random_rgb(rng, 24, 24);
    const Mask mask = random_mask(rng, 24, 24);
    std::vector<std::uint8_t> px(img.bytes().begin(), img.bytes().end());
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      if (mask.data[i]) continue;
      for (int c = 0; c < 3; ++c) px[3 * i + c] = static_cast<std::uint8_t>(rng() % 256);
    }
    const auto changed = ImageBuffer::rgb8(24, 24, px);
    for (const auto& name : descriptor_names()) {
      std::optional<FeatureVector> a, b;
      try {
        a = extract(name, img, mask, cfg);
      } catch (const Error&) {
      }
      try {
        b = extract(name, changed, mask, cfg);
      } catch (const Error&) {
      }
      CHECK_MESSAGE(a == b, name);
    }
  }
}

TEST_CASE("lbp ignores a uniform brightness shift") {
  std::mt19937 rng(47);
  const DescriptorConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = oracle::random_gray(rng, 16, 16, 200);
    const auto shift = static_cast<std::uint8_t>(1 + rng() % 55);
    std::vector<std::uint8_t> px(g.bytes().begin(), g.bytes().end());
    for (auto& p : px) p = static_cast<std::uint8_t>(p + shift);
    const auto shifted = ImageBuffer::gray8(16, 16, px);
    CHECK(lbp_hist(shifted, all_of(g), cfg) == lbp_hist(g, all_of(g), cfg));
  }
}

TEST_CASE("ltp with zero threshold matches lbp away from ties") {
  std::mt19937 rng(53);
  DescriptorConfig cfg;
  cfg.ltp_theta = 0;
  // Distinct values everywhere: a shuffled permutation of 0..255.
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::uint8_t> px(256);
    std::iota(px.begin(), px.end(), 0);
    std::shuffle(px.begin(), px.end(), rng);
    const auto g = ImageBuffer::gray8(16, 16, px);
    const auto lbp = lbp_hist(g, all_of(g), cfg);
    const auto ltp = ltp_hist(g, all_of(g), cfg);
    for (std::size_t i = 0; i < 256; ++i) CHECK(2.0 * ltp.values[i] == doctest::Approx(lbp.values[i]));
  }
}

TEST_CASE("normalize examples") {
  CHECK(normalize(FeatureVector::single("x", {4, 0, 0, 0})).values == std::vector<double>{1, 0, 0, 0});
  CHECK(normalize(FeatureVector::single("x", {1, 1, 1, 1})).values ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});
  const auto zero = normalize(FeatureVector::single("x", {0, 0}));
  CHECK(zero.values == std::vector<double>{0, 0});
  CHECK(zero.blocks[0].degenerate);
  CHECK(error_kind([] { normalize(FeatureVector::single("x", {1, std::nan("")})); }) ==
        ErrorKind::Numeric);
}

TEST_CASE("fuse layout and associativity") {
  std::mt19937 rng(59);
  const auto img = oracle::random_rgb(rng, 16, 16);
  const Mask mask = all_of(img);
  const DescriptorConfig cfg;
  const auto g = extract("gch", img, mask, cfg);
  const auto l = extract("lbp", img, mask, cfg);
  const std::vector<FeatureVector> pair{g, l};
  const auto fused = fuse(pair);
  CHECK(fused.size() == 320);
  REQUIRE(fused.blocks.size() == 2);
  CHECK(fused.blocks[0] == FeatureBlock{"gch", 0, 64, false});
  CHECK(fused.blocks[1] == FeatureBlock{"lbp", 64, 256, false});

  const std::vector<FeatureVector> one{g};
  CHECK(fuse(one) == g);

  const auto c = extract("clbp", img, mask, cfg);
  const std::vector<FeatureVector> flat{g, l, c};
  const std::vector<FeatureVector> nested{fused, c};
  CHECK(fuse(flat) == fuse(nested));

  const std::vector<std::string> triple{"cdh", "seh", "clbp"};
  CHECK(extract_fused(triple, img, mask, cfg).size() == 694);
  CHECK(error_kind([] { fuse(std::vector<FeatureVector>{}); }) == ErrorKind::Precondition);
  CHECK(error_kind([&] { extract_fused(std::vector<std::string>{}, img, mask, cfg); }) ==
        ErrorKind::Precondition);
}

TEST_CASE("feature lists") {
  CHECK(parse_feature_list("cdh,seh,clbp") == std::vector<std::string>{"cdh", "seh", "clbp"});
  CHECK(parse_feature_list(" GCH , lbp ") == std::vector<std::string>{"gch", "lbp"});
  CHECK(join_feature_list(parse_feature_list("ltp,ccv")) == "ltp,ccv");
  CHECK(error_kind([] { parse_feature_list("gch,hog"); }) == ErrorKind::Parse);
  CHECK(error_kind([] { parse_feature_list("gch,gch"); }) == ErrorKind::Parse);
}

}  // TEST_SUITE
