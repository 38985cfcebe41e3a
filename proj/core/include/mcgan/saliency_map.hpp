#pragma once

#include <cstdint>
#include <vector>

namespace mcgan {

enum class MapVariant { raw, probability, zscored };

// H x W nonnegative map with an explicit normalization variant.
struct SaliencyMap {
  int64_t width = 0, height = 0;
  std::vector<double> values;  // row-major
  MapVariant variant = MapVariant::raw;

  SaliencyMap() = default;
  SaliencyMap(int64_t w, int64_t h, std::vector<double> v,
              MapVariant var = MapVariant::raw)
      : width(w), height(h), values(std::move(v)), variant(var) {}

  double& at(int64_t x, int64_t y) { return values[y * width + x]; }
  double at(int64_t x, int64_t y) const { return values[y * width + x]; }
  int64_t pixels() const { return width * height; }
};

// One gaze point in pixel coordinates.
struct Fixation {
  int64_t x = 0, y = 0;
};

using FixationSet = std::vector<Fixation>;

}  // namespace mcgan
