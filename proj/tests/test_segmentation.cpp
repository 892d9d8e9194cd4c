#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "fruitscan/segmentation.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fruitscan;
using testing::error_kind;

namespace {

double squared(const Point2& a, const Point2& b) {
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]);
}

// Nearest centroid (lowest index on ties) and SSE agree with the result.
void check_assignment_optimal(std::span<const Point2> pts, const ClusterResult& r) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::uint32_t best = 0;
    for (std::uint32_t j = 1; j < r.centroids.size(); ++j) {
      if (squared(pts[i], r.centroids[j]) < squared(pts[i], r.centroids[best])) best = j;
    }
    CHECK(r.assignments[i] == best);
    sse += squared(pts[i], r.centroids[r.assignments[i]]);
  }
  CHECK(std::abs(sse - r.sse) <= 1e-6 * std::max(1.0, sse));
}

std::vector<Point2> blob_points(std::mt19937& rng, int per_blob) {
  std::normal_distribution<double> noise(0.0, 1.5);
  const Point2 centers[] = {{-20, 5}, {15, 30}, {25, -18}, {0, 0}};
  std::vector<Point2> pts;
  for (const auto& c : centers) {
    for (int i = 0; i < per_blob; ++i) pts.push_back({c[0] + noise(rng), c[1] + noise(rng)});
  }
  return pts;
}

// Groups of point indices per cluster, independent of cluster numbering.
std::set<std::set<std::size_t>> partition_of(const std::vector<std::uint32_t>& assignments,
                                             const std::vector<std::size_t>& original_index) {
  std::map<std::uint32_t, std::set<std::size_t>> groups;
  for (std::size_t i = 0; i < assignments.size(); ++i) groups[assignments[i]].insert(original_index[i]);
  std::set<std::set<std::size_t>> out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

ImageBuffer quadrants(int half) {
  const std::uint8_t colors[4][3] = {{220, 30, 30}, {30, 200, 40}, {40, 60, 220}, {230, 220, 40}};
  const int s = 2 * half;
  std::vector<std::uint8_t> px;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      const int q = (y >= half ? 2 : 0) + (x >= half ? 1 : 0);
      px.insert(px.end(), colors[q], colors[q] + 3);
    }
  }
  return ImageBuffer::rgb8(s, s, px);
}

// Green disk with a brown patch on white ground; returns the image and the
// ground-truth patch pixels.
std::pair<ImageBuffer, Mask> apple_with_blotch() {
  const int s = 64;
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> jitter(-4, 4);
  Mask blotch = Mask::filled(s, s, false);
  std::vector<std::uint8_t> px;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      int rgb[3] = {250, 250, 250};
      if (std::hypot(x - 32.0, y - 32.0) < 26.0) {
        rgb[0] = 95; rgb[1] = 170; rgb[2] = 60;
        if (std::hypot(x - 38.0, y - 26.0) < 9.0) {
          rgb[0] = 110; rgb[1] = 70; rgb[2] = 35;
          blotch.data[static_cast<std::size_t>(y) * s + x] = 1;
        }
      }
      for (int c : rgb) px.push_back(static_cast<std::uint8_t>(std::clamp(c + jitter(rng), 0, 255)));
    }
  }
  return {ImageBuffer::rgb8(s, s, px), blotch};
}

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("config validation") {
  KMeansConfig c;
  CHECK_NOTHROW(c.validate());
  c.k = 0;
  CHECK(error_kind([&] { c.validate(); }) == ErrorKind::Precondition);
  c = {};
  c.max_iterations = 0;
  CHECK(error_kind([&] { c.validate(); }) == ErrorKind::Precondition);
  c = {};
  c.tolerance = -1;
  CHECK(error_kind([&] { c.validate(); }) == ErrorKind::Precondition);
}

TEST_CASE("two separated blobs") {
  std::vector<Point2> pts(10, Point2{0, 0});
  pts.insert(pts.end(), 10, Point2{10, 10});
  KMeansConfig cfg;
  cfg.k = 2;
  const auto r = kmeans(pts, cfg);
  std::vector<Point2> c = r.centroids;
  std::sort(c.begin(), c.end());
  CHECK(c[0] == Point2{0, 0});
  CHECK(c[1] == Point2{10, 10});
  CHECK(r.sse == 0.0);
}

TEST_CASE("k=1 gives the mean and total scatter") {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<Point2> pts(37);
  for (auto& p : pts) p = {u(rng), u(rng)};
  KMeansConfig cfg;
  cfg.k = 1;
  const auto r = kmeans(pts, cfg);
  Point2 mean{0, 0};
  for (const auto& p : pts) {
    mean[0] += p[0] / pts.size();
    mean[1] += p[1] / pts.size();
  }
  double scatter = 0;
  for (const auto& p : pts) scatter += squared(p, mean);
  CHECK(r.centroids[0][0] == doctest::Approx(mean[0]).epsilon(1e-12));
  CHECK(r.centroids[0][1] == doctest::Approx(mean[1]).epsilon(1e-12));
  CHECK(r.sse == doctest::Approx(scatter).epsilon(1e-12));
}

TEST_CASE("12 points, k=3 reaches the exhaustive optimum") {
  const std::vector<oracle::Point> raw{{0, 0},  {1, 0.5}, {0.4, 1.8}, {6, 6},   {7, 5.2}, {6.5, 7.4},
                                       {-5, 8}, {-6, 7},  {-4.2, 9},  {2.5, 3}, {-1, 4},  {4, 1}};
  std::vector<Point2> pts;
  for (const auto& p : raw) pts.push_back({p.x, p.y});
  KMeansConfig cfg;
  cfg.k = 3;
  cfg.restarts = 10;
  const auto r = kmeans(pts, cfg);
  CHECK(std::abs(r.sse - oracle::best_lloyd_fixed_point(raw, 3)) <= 1e-9);
  check_assignment_optimal(pts, r);
}

TEST_CASE("k above the distinct point count is infeasible") {
  const std::vector<Point2> pts{{1, 1}, {1, 1}, {2, 2}};
  KMeansConfig cfg;
  cfg.k = 3;
  CHECK(error_kind([&] { kmeans(pts, cfg); }) == ErrorKind::Infeasible);
  CHECK(error_kind([&] { kmeans(std::vector<Point2>{}, cfg); }) == ErrorKind::Precondition);
  cfg.k = 2;
  CHECK_NOTHROW(kmeans(pts, cfg));
}

TEST_CASE("sse trace is non-increasing and results are optimal assignments") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> u(-30, 30);
    std::vector<Point2> pts(200);
    for (auto& p : pts) p = {u(rng), u(rng)};
    KMeansConfig cfg;
    cfg.k = 2 + trial % 5;
    cfg.seed = trial;
    const auto r = kmeans(pts, cfg);
    REQUIRE(!r.sse_trace.empty());
    for (std::size_t i = 1; i < r.sse_trace.size(); ++i) {
      CHECK(r.sse_trace[i] <= r.sse_trace[i - 1] + 1e-9 * r.sse_trace[i - 1]);
    }
    CHECK(r.iterations_run >= 1);
    CHECK(r.iterations_run <= cfg.max_iterations);
    for (auto a : r.assignments) CHECK(a < static_cast<std::uint32_t>(cfg.k));
    check_assignment_optimal(pts, r);
  }
}

TEST_CASE("identical inputs give bit-identical results") {
  std::mt19937 rng(11);
  const auto pts = blob_points(rng, 40);
  KMeansConfig cfg;
  cfg.seed = 99;
  CHECK(kmeans(pts, cfg) == kmeans(pts, cfg));
}

TEST_CASE("permuting the input only relabels the clusters") {
  std::mt19937 rng(13);
  const auto pts = blob_points(rng, 30);
  std::vector<std::size_t> identity(pts.size());
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  KMeansConfig cfg;
  const auto base = partition_of(kmeans(pts, cfg).assignments, identity);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> order = identity;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Point2> shuffled;
    for (auto i : order) shuffled.push_back(pts[i]);
    CHECK(partition_of(kmeans(shuffled, cfg).assignments, order) == base);
  }
}

TEST_CASE("four solid quadrants") {
  const auto img = quadrants(8);
  const auto seg = segment_image(img, KMeansConfig{});
  REQUIRE(seg.cluster_stats.size() == 4);
  for (const auto& s : seg.cluster_stats) CHECK(s.pixel_count == 64);
  std::set<std::uint32_t> seen;
  for (int q = 0; q < 4; ++q) {
    const int ox = (q % 2) * 8;
    const int oy = (q / 2) * 8;
    const auto label = seg.labels[static_cast<std::size_t>(oy) * 16 + ox];
    seen.insert(label);
    for (int y = oy; y < oy + 8; ++y) {
      for (int x = ox; x < ox + 8; ++x) CHECK(seg.labels[static_cast<std::size_t>(y) * 16 + x] == label);
    }
  }
  CHECK(seen.size() == 4);
  CHECK(!seg.selected_cluster);
}

TEST_CASE("uniform image is infeasible at k=4") {
  const auto img = ImageBuffer::rgb8(4, 4, std::vector<std::uint8_t>(48, 120));
  CHECK(error_kind([&] { segment_image(img, KMeansConfig{}); }) == ErrorKind::Infeasible);
}

TEST_CASE("synthetic blotch forms one pure cluster at k=3 and darkest selects it") {
  const auto [img, blotch] = apple_with_blotch();
  KMeansConfig cfg;
  cfg.k = 3;
  const auto seg = segment_image(img, cfg);
  std::size_t total = 0;
  for (const auto& s : seg.cluster_stats) total += s.pixel_count;
  CHECK(total == img.pixel_count());

  std::map<std::uint32_t, std::size_t> hits;
  for (std::size_t i = 0; i < blotch.data.size(); ++i) {
    if (blotch.data[i]) ++hits[seg.labels[i]];
  }
  const auto cluster = std::max_element(hits.begin(), hits.end(), [](auto& a, auto& b) {
                         return a.second < b.second;
                       })->first;
  const double purity = static_cast<double>(hits[cluster]) / seg.cluster_stats[cluster].pixel_count;
  const double coverage = static_cast<double>(hits[cluster]) / blotch.count();
  CHECK(purity >= 0.99);
  CHECK(coverage >= 0.99);

  const auto selected = select_disease_cluster(seg, SelectDarkest{});
  REQUIRE(selected.selected_cluster);
  CHECK(*selected.selected_cluster == cluster);
  CHECK(selected.mask.count() == seg.cluster_stats[cluster].pixel_count);
}

TEST_CASE("manual selection and range errors") {
  const auto seg = segment_image(quadrants(4), KMeansConfig{});
  const auto picked = select_disease_cluster(seg, SelectManual{2});
  CHECK(picked.selected_cluster == 2u);
  for (std::size_t i = 0; i < seg.labels.size(); ++i) {
    CHECK((picked.mask.data[i] != 0) == (seg.labels[i] == 2));
  }
  CHECK(picked.mask.count() == seg.cluster_stats[2].pixel_count);
  CHECK(error_kind([&] { select_disease_cluster(seg, SelectManual{7}); }) == ErrorKind::Range);
}

TEST_CASE("darkest fails when every cluster covers half the image") {
  std::vector<std::uint8_t> px;
  for (int i = 0; i < 8; ++i) px.insert(px.end(), {200, 30, 30});
  for (int i = 0; i < 8; ++i) px.insert(px.end(), {30, 30, 200});
  KMeansConfig cfg;
  cfg.k = 2;
  const auto seg = segment_image(ImageBuffer::rgb8(4, 4, px), cfg);
  CHECK(error_kind([&] { select_disease_cluster(seg, SelectDarkest{}); }) ==
        ErrorKind::SelectionFailed);
}

TEST_CASE("selection strings") {
  CHECK(std::holds_alternative<SelectDarkest>(parse_selection("darkest")));
  const auto m = parse_selection("manual:3");
  REQUIRE(std::holds_alternative<SelectManual>(m));
  CHECK(std::get<SelectManual>(m).index == 3);
  CHECK(to_string(m) == "manual:3");
  CHECK(to_string(parse_selection("darkest")) == "darkest");
  CHECK(error_kind([] { parse_selection("brightest"); }) == ErrorKind::Parse);
  CHECK(error_kind([] { parse_selection("manual:x"); }) == ErrorKind::Parse);
}

TEST_CASE("mask_to_image") {
  std::vector<std::uint8_t> red;
  for (int i = 0; i < 16; ++i) red.insert(red.end(), {255, 0, 0});
  const auto img = ImageBuffer::rgb8(4, 4, red);
  CHECK(mask_to_image(img, Mask::filled(4, 4, true)) == img);
  CHECK(mask_to_image(img, Mask::filled(4, 4, false)) ==
        ImageBuffer::rgb8(4, 4, std::vector<std::uint8_t>(48, 0)));

  Mask checker = Mask::filled(4, 4, false);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) checker.data[static_cast<std::size_t>(y) * 4 + x] = (x + y) % 2 == 0;
  }
  const auto out = mask_to_image(img, checker);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) {
      const double expect = (x + y) % 2 == 0 ? 255 : 0;
      CHECK(out.at(x, y, 0) == expect);
      CHECK(out.at(x, y, 1) == 0);
      CHECK(out.at(x, y, 2) == 0);
    }
  }
  CHECK(error_kind([&] { mask_to_image(img, Mask::filled(3, 4, true)); }) ==
        ErrorKind::Precondition);
}

}  // TEST_SUITE
