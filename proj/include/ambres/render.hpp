#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "ambres/sim_world.hpp"

namespace ambres {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  uint8_t* px(int x, int y) { return rgb.data() + 3 * (static_cast<size_t>(y) * width + x); }
  const uint8_t* px(int x, int y) const {
    return rgb.data() + 3 * (static_cast<size_t>(y) * width + x);
  }
};

inline constexpr int kImageSize = 512;
inline constexpr int kBlockSide = 48;
inline constexpr int kBowlRadius = 28;
inline constexpr std::array<uint8_t, 3> kTableBackground = {210, 210, 210};

std::array<uint8_t, 3> color_rgb(Color c);

/// Pixel center of a grid cell: (32 + 80*col + 24, 64 + 96*row + 16).
std::array<int, 2> cell_center(const Cell& cell);

// Deterministic top-down 512x512 raster: blocks as filled squares,
// bowls as filled circles, centered at cell centers.
Image render_scene(const Scene& scene);

std::vector<uint8_t> encode_png(const Image& image);
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace ambres
