#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmv {

// Packed 8-bit RGB, row-major, no padding.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  bool same_size(const RgbImage& other) const { return width == other.width && height == other.height; }

  std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* at(int x, int y) const {
    return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }

  static RgbImage solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  bool operator==(const RgbImage&) const = default;
};

// Reads jpg/png from disk. Throws Error{DecodeFailure}.
RgbImage load_image(const std::filesystem::path& path);

// Bilinear resize so that max(width, height) == max_side, aspect preserved.
RgbImage resize_longer_side(const RgbImage& image, int max_side);

// Also used to shrink decoded frames for analysis; never upscales.
RgbImage shrink_to_fit(const RgbImage& image, int max_side);

std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality);
RgbImage decode_jpeg(std::span<const std::uint8_t> bytes);

// Standard alphabet with '=' padding.
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::string_view bytes);

}  // namespace mmv
