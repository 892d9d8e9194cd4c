#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fruitscan/imaging.hpp"

namespace fruitscan {

// Seeded stand-in for a photographed apple: a shaded green disk on a white
// ground carrying one of four defect patterns.
enum class SyntheticClass { Blotch, Rot, Scab, Normal };

const std::vector<SyntheticClass>& synthetic_classes();
std::string to_string(SyntheticClass cls);

struct SyntheticSample {
  ImageBuffer image;  // RGB8
  Mask fruit;         // pixels of the disk
  Mask defect;        // pixels painted by the defect pattern; empty for Normal
};

SyntheticSample synthesize_apple(SyntheticClass cls, std::uint64_t seed, int size = 96);

struct SyntheticCorpusSpec {
  int images_per_class = 60;
  int size = 96;
  std::uint64_t seed = 1;
};

// Writes <dir>/<class>/<class>_<nn>.png plus <dir>/manifest.csv listing
// classes in the order blotch, rot, scab, normal. Returns the manifest path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SyntheticCorpusSpec& spec);

}  // namespace fruitscan
