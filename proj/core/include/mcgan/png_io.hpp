#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mcgan {

// Minimal 8-bit PNG support: grayscale and RGB, no interlace.
struct PngImage {
  int64_t width = 0, height = 0;
  int channels = 0;                // 1 (gray) or 3 (rgb)
  std::vector<uint8_t> pixels;     // row-major, interleaved
};

void write_png(const std::string& path, const PngImage& img);
PngImage read_png(const std::string& path);

// Grayscale helpers for saliency maps in [0,1].
void write_gray_png(const std::string& path, int64_t width, int64_t height,
                    const std::vector<double>& values01);
std::vector<double> read_gray_png(const std::string& path, int64_t& width,
                                  int64_t& height);

}  // namespace mcgan
