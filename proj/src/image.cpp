#include "mmv/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <openssl/evp.h>

#include "mmv/error.hpp"

namespace mmv {

namespace {

cv::Mat as_bgr_mat(const RgbImage& image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

RgbImage from_bgr_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    std::copy_n(rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3, out.at(0, y));
  }
  return out;
}

RgbImage resize_to(const RgbImage& image, int w, int h) {
  if (w == image.width && h == image.height) return image;
  cv::Mat src(image.height, image.width, CV_8UC3, const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(w, h), 0, 0, cv::INTER_LINEAR);
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y) {
    std::copy_n(dst.ptr<std::uint8_t>(y), static_cast<std::size_t>(w) * 3, out.at(0, y));
  }
  return out;
}

}  // namespace

RgbImage RgbImage::solid(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  RgbImage img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    img.pixels[i] = r;
    img.pixels[i + 1] = g;
    img.pixels[i + 2] = b;
  }
  return img;
}

RgbImage load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(Errc::DecodeFailure, "cannot decode image " + path.string());
  return from_bgr_mat(bgr);
}

RgbImage resize_longer_side(const RgbImage& image, int max_side) {
  if (image.empty() || max_side <= 0) {
    throw Error(Errc::InvalidArgument, "resize of empty image or non-positive target");
  }
  const int longer = std::max(image.width, image.height);
  const double scale = static_cast<double>(max_side) / longer;
  int w = image.width >= image.height ? max_side
                                      : std::max(1, static_cast<int>(std::lround(image.width * scale)));
  int h = image.height > image.width ? max_side
                                     : std::max(1, static_cast<int>(std::lround(image.height * scale)));
  return resize_to(image, w, h);
}

RgbImage shrink_to_fit(const RgbImage& image, int max_side) {
  if (max_side <= 0 || std::max(image.width, image.height) <= max_side) return image;
  return resize_longer_side(image, max_side);
}

std::vector<std::uint8_t> encode_jpeg(const RgbImage& image, int quality) {
  if (image.empty()) throw Error(Errc::EncodeFailure, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  const std::vector<int> params{cv::IMWRITE_JPEG_QUALITY, std::clamp(quality, 1, 100)};
  if (!cv::imencode(".jpg", as_bgr_mat(image), out, params)) {
    throw Error(Errc::EncodeFailure, "JPEG encoder rejected the image");
  }
  return out;
}

RgbImage decode_jpeg(std::span<const std::uint8_t> bytes) {
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(Errc::DecodeFailure, "not a decodable image");
  return from_bgr_mat(bgr);
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_encode(std::string_view bytes) {
  return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(Errc::InvalidArgument, "base64 length not a multiple of 4");
  std::vector<std::uint8_t> out(3 * text.size() / 4);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(Errc::InvalidArgument, "malformed base64");
  std::size_t len = static_cast<std::size_t>(n);
  // EVP_DecodeBlock keeps the zero bytes produced by padding.
  if (!text.empty() && text.back() == '=') --len;
  if (text.size() > 1 && text[text.size() - 2] == '=') --len;
  out.resize(len);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char c = digest[i];
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

}  // namespace mmv
