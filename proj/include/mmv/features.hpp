#pragma once

#include <array>
#include <cstddef>

#include "mmv/image.hpp"

namespace mmv {

// 16 hue x 4 saturation x 4 value bins, index = h*16 + s*4 + v.
inline constexpr int kHueBins = 16;
inline constexpr int kSatBins = 4;
inline constexpr int kValBins = 4;
inline constexpr std::size_t kHsvBins = kHueBins * kSatBins * kValBins;

inline constexpr int kLumaGrid = 8;
inline constexpr std::size_t kLumaCells = kLumaGrid * kLumaGrid;

using HsvHistogram = std::array<double, kHsvBins>;
using LumaGrid = std::array<double, kLumaCells>;

struct Hsv {
  double h;  // degrees [0, 360)
  double s;  // [0, 1]
  double v;  // [0, 1]
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::size_t hsv_bin(const Hsv& hsv);

// Normalized to unit L1 mass.
HsvHistogram hsv_histogram(const RgbImage& image);

// Mean Rec.601 luma per cell of an 8x8 grid, in [0, 1]; row-major.
LumaGrid luma_grid(const RgbImage& image);

}  // namespace mmv
