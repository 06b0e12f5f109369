#include "mmv/features.hpp"

#include <algorithm>
#include <cmath>

#include "mmv/error.hpp"

namespace mmv {

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;
  Hsv out{0.0, mx > 0.0 ? delta / mx : 0.0, mx};
  if (delta > 0.0) {
    double h;
    if (mx == r) {
      h = std::fmod((g - b) / delta, 6.0);
    } else if (mx == g) {
      h = (b - r) / delta + 2.0;
    } else {
      h = (r - g) / delta + 4.0;
    }
    h *= 60.0;
    if (h < 0.0) h += 360.0;
    out.h = h >= 360.0 ? 0.0 : h;
  }
  return out;
}

std::size_t hsv_bin(const Hsv& hsv) {
  const int hb = std::min(kHueBins - 1, static_cast<int>(hsv.h / (360.0 / kHueBins)));
  const int sb = std::min(kSatBins - 1, static_cast<int>(hsv.s * kSatBins));
  const int vb = std::min(kValBins - 1, static_cast<int>(hsv.v * kValBins));
  return static_cast<std::size_t>(hb * kSatBins * kValBins + sb * kValBins + vb);
}

HsvHistogram hsv_histogram(const RgbImage& image) {
  if (image.empty()) throw Error(Errc::InvalidArgument, "histogram of an empty image");
  HsvHistogram hist{};
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  const std::uint8_t* p = image.pixels.data();
  for (std::size_t i = 0; i < n; ++i, p += 3) hist[hsv_bin(rgb_to_hsv(p[0], p[1], p[2]))] += 1.0;
  for (double& bin : hist) bin /= static_cast<double>(n);
  return hist;
}

LumaGrid luma_grid(const RgbImage& image) {
  if (image.empty()) throw Error(Errc::InvalidArgument, "luma grid of an empty image");
  LumaGrid grid{};
  auto cell_range = [](int cell, int extent) {
    int lo = cell * extent / kLumaGrid;
    int hi = (cell + 1) * extent / kLumaGrid;
    if (hi <= lo) hi = std::min(extent, lo + 1);
    lo = std::min(lo, extent - 1);
    return std::pair{lo, hi};
  };
  for (int cy = 0; cy < kLumaGrid; ++cy) {
    const auto [y0, y1] = cell_range(cy, image.height);
    for (int cx = 0; cx < kLumaGrid; ++cx) {
      const auto [x0, x1] = cell_range(cx, image.width);
      // Integer Rec.601 weights (per mille) keep solid frames exact.
      std::int64_t sum = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const std::uint8_t* px = image.at(x, y);
          sum += 299 * px[0] + 587 * px[1] + 114 * px[2];
        }
      }
      const std::int64_t count = static_cast<std::int64_t>(y1 - y0) * (x1 - x0);
      grid[static_cast<std::size_t>(cy * kLumaGrid + cx)] =
          static_cast<double>(sum) / static_cast<double>(count * 255 * 1000);
    }
  }
  return grid;
}

}  // namespace mmv
