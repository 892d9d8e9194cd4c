#include "fruitscan/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "fruitscan/error.hpp"
#include "random.hpp"

namespace fruitscan {

namespace {

using Rgb = std::array<double, 3>;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double gaussian(detail::Rng& rng) {
  // Box-Muller; 1 - unit() keeps the log argument in (0, 1].
  const double u = 1.0 - rng.unit();
  const double v = rng.unit();
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

Rgb jitter(detail::Rng& rng, Rgb base, double amount) {
  for (double& c : base) c += rng.uniform(-amount, amount);
  return base;
}

Rgb mix(const Rgb& a, const Rgb& b, double w) {
  return {a[0] + (b[0] - a[0]) * w, a[1] + (b[1] - a[1]) * w, a[2] + (b[2] - a[2]) * w};
}

class Canvas {
 public:
  explicit Canvas(int size) : size_(size), pixels_(static_cast<std::size_t>(size) * size) {}

  int size() const { return size_; }
  Rgb& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * size_ + x]; }

  ImageBuffer finish() const {
    std::vector<std::uint8_t> data;
    data.reserve(pixels_.size() * 3);
    for (const auto& p : pixels_) {
      for (double c : p) data.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(c), 0L, 255L)));
    }
    return ImageBuffer::rgb8(size_, size_, std::move(data));
  }

 private:
  int size_;
  std::vector<Rgb> pixels_;
};

struct Disk {
  double cx;
  double cy;
  double r;
  bool inside(double x, double y) const { return std::hypot(x - cx, y - cy) < r; }
};

// A uniformly random point within `fraction` of the disk radius.
std::pair<double, double> point_in(detail::Rng& rng, const Disk& disk, double fraction) {
  const double radius = disk.r * fraction * std::sqrt(rng.unit());
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return {disk.cx + radius * std::cos(angle), disk.cy + radius * std::sin(angle)};
}

void paint_blush(Canvas& canvas, detail::Rng& rng, const Disk& fruit) {
  const auto [bx, by] = point_in(rng, fruit, 0.5);
  const double radius = fruit.r * rng.uniform(0.4, 0.65);
  const Rgb red = jitter(rng, {185, 72, 55}, 12);
  const double strength = rng.uniform(0.35, 0.6);
  for (int y = 0; y < canvas.size(); ++y) {
    for (int x = 0; x < canvas.size(); ++x) {
      const double d = std::hypot(x - bx, y - by);
      if (!fruit.inside(x, y) || d >= radius) continue;
      canvas.at(x, y) = mix(canvas.at(x, y), red, strength * (1.0 - d / radius));
    }
  }
}

void paint_blotch(Canvas& canvas, Mask& defect, detail::Rng& rng, const Disk& fruit) {
  const int s = canvas.size();
  const auto [ox, oy] = point_in(rng, fruit, 0.35);
  struct Lobe {
    double x, y, r, freq, phase, depth;
  };
  std::vector<Lobe> lobes;
  const int count = 3 + static_cast<int>(rng.below(4));
  for (int i = 0; i < count; ++i) {
    lobes.push_back({ox + rng.uniform(-0.13, 0.13) * s, oy + rng.uniform(-0.13, 0.13) * s,
                     rng.uniform(0.05, 0.1) * s, static_cast<double>(3 + rng.below(5)),
                     rng.uniform(0.0, 2.0 * std::numbers::pi), rng.uniform(0.1, 0.25)});
  }
  const Rgb dark = jitter(rng, {72, 48, 32}, 12);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (!Disk{fruit.cx, fruit.cy, fruit.r - 1.5}.inside(x, y)) continue;
      bool hit = false;
      for (const auto& l : lobes) {
        const double theta = std::atan2(y - l.y, x - l.x);
        const double edge = l.r * (1.0 + l.depth * std::sin(l.freq * theta + l.phase));
        if (std::hypot(x - l.x, y - l.y) < edge) hit = true;
      }
      if (!hit) continue;
      canvas.at(x, y) = mix(canvas.at(x, y), dark, 0.92);
      defect.data[static_cast<std::size_t>(y) * s + x] = 1;
    }
  }
}

void paint_rot(Canvas& canvas, Mask& defect, detail::Rng& rng, const Disk& fruit) {
  const int s = canvas.size();
  const auto [cx, cy] = point_in(rng, fruit, 0.4);
  const double radius = rng.uniform(0.14, 0.2) * s;
  const double ring = rng.uniform(2.5, 3.5);
  const double halo = rng.uniform(2.0, 4.0);
  const Rgb light = jitter(rng, {138, 82, 42}, 12);
  const Rgb deep{light[0] * 0.62, light[1] * 0.62, light[2] * 0.62};
  const Rgb rim = jitter(rng, {170, 78, 46}, 12);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (!Disk{fruit.cx, fruit.cy, fruit.r - 1.5}.inside(x, y)) continue;
      const double d = std::hypot(x - cx, y - cy);
      if (d < radius) {
        const bool odd = static_cast<int>(d / ring) % 2 == 1;
        canvas.at(x, y) = mix(canvas.at(x, y), odd ? light : deep, 0.95);
        defect.data[static_cast<std::size_t>(y) * s + x] = 1;
      } else if (d < radius + halo) {
        canvas.at(x, y) = mix(canvas.at(x, y), rim, 0.6 * (1.0 - (d - radius) / halo));
      }
    }
  }
}

void paint_scab(Canvas& canvas, Mask& defect, detail::Rng& rng, const Disk& fruit) {
  const int s = canvas.size();
  const Rgb cork = jitter(rng, {80, 58, 38}, 12);
  const int spots = 18 + static_cast<int>(rng.below(13));
  for (int i = 0; i < spots; ++i) {
    const auto [sx, sy] = point_in(rng, fruit, 0.8);
    const double r = rng.uniform(2.5, 4.0);
    const Rgb tone = jitter(rng, cork, 6);
    for (int y = std::max(0, static_cast<int>(sy - r - 1)); y <= std::min(s - 1, static_cast<int>(sy + r + 1)); ++y) {
      for (int x = std::max(0, static_cast<int>(sx - r - 1)); x <= std::min(s - 1, static_cast<int>(sx + r + 1)); ++x) {
        if (std::hypot(x - sx, y - sy) >= r || !fruit.inside(x, y)) continue;
        // Corky texture: strong per-pixel roughness inside each spot.
        const double grain = 16.0 * gaussian(rng);
        canvas.at(x, y) = {tone[0] + grain, tone[1] + grain, tone[2] + 0.6 * grain};
        defect.data[static_cast<std::size_t>(y) * s + x] = 1;
      }
    }
  }
}

}  // namespace

const std::vector<SyntheticClass>& synthetic_classes() {
  static const std::vector<SyntheticClass> classes{SyntheticClass::Blotch, SyntheticClass::Rot,
                                                   SyntheticClass::Scab, SyntheticClass::Normal};
  return classes;
}

std::string to_string(SyntheticClass cls) {
  switch (cls) {
    case SyntheticClass::Blotch: return "blotch";
    case SyntheticClass::Rot: return "rot";
    case SyntheticClass::Scab: return "scab";
    case SyntheticClass::Normal: return "normal";
  }
  return "unknown";
}

SyntheticSample synthesize_apple(SyntheticClass cls, std::uint64_t seed, int size) {
  require(size >= 32, "synthesize_apple: size must be >= 32");
  detail::Rng rng(splitmix(seed * 8 + static_cast<std::uint64_t>(cls)));
  Canvas canvas(size);
  SyntheticSample out;
  out.fruit = Mask::filled(size, size, false);
  out.defect = Mask::filled(size, size, false);

  const Disk fruit{size / 2.0 + rng.uniform(-2, 2), size / 2.0 + rng.uniform(-2, 2),
                   size * rng.uniform(0.36, 0.4)};
  const Rgb green = jitter(rng, {105, 165, 58}, 12);
  const double light_x = rng.uniform(-0.4, 0.4);
  const double light_y = rng.uniform(-0.5, -0.2);
  // Skin roughness varies between fruits, so fine grain alone is not a class cue.
  const double roughness = rng.uniform(2.0, 4.5);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (!fruit.inside(x, y)) {
        canvas.at(x, y) = {248, 248, 246};
        continue;
      }
      out.fruit.data[static_cast<std::size_t>(y) * size + x] = 1;
      const double u = (x - fruit.cx) / fruit.r;
      const double v = (y - fruit.cy) / fruit.r;
      const double z = std::sqrt(std::max(0.0, 1.0 - u * u - v * v));
      const double shade = 0.72 + 0.3 * z + 0.12 * (u * light_x + v * light_y);
      canvas.at(x, y) = {green[0] * shade, green[1] * shade, green[2] * shade};
    }
  }

  if (rng.unit() < (cls == SyntheticClass::Normal ? 0.6 : 0.3)) paint_blush(canvas, rng, fruit);
  switch (cls) {
    case SyntheticClass::Blotch: paint_blotch(canvas, out.defect, rng, fruit); break;
    case SyntheticClass::Rot: paint_rot(canvas, out.defect, rng, fruit); break;
    case SyntheticClass::Scab: paint_scab(canvas, out.defect, rng, fruit); break;
    case SyntheticClass::Normal: break;
  }

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double sigma = fruit.inside(x, y) ? roughness : 1.5;
      for (double& c : canvas.at(x, y)) c += sigma * gaussian(rng);
    }
  }
  out.image = canvas.finish();
  return out;
}

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SyntheticCorpusSpec& spec) {
  require(spec.images_per_class >= 1, "synthetic corpus: images_per_class must be >= 1");
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / "manifest.csv";
  std::ofstream manifest(manifest_path);
  if (!manifest) fail(ErrorKind::Io, "cannot write " + manifest_path.string());
  manifest << "path,label\n";
  for (SyntheticClass cls : synthetic_classes()) {
    const std::string name = to_string(cls);
    std::filesystem::create_directories(dir / name);
    for (int i = 0; i < spec.images_per_class; ++i) {
      char file[64];
      std::snprintf(file, sizeof file, "%s_%03d.png", name.c_str(), i);
      const auto seed = spec.seed * 1000003ull + static_cast<std::uint64_t>(i);
      save_png(synthesize_apple(cls, seed, spec.size).image, dir / name / file);
      manifest << name << '/' << file << ',' << name << '\n';
    }
  }
  return manifest_path;
}

}  // namespace fruitscan
