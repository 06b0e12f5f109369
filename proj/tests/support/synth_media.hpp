#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmv/image.hpp"

namespace mmv::testing {

// A frame that is easy to tell apart from every other scene id: its own hue,
// brightness and stripe pattern.
RgbImage scene_frame(int scene, int width, int height);

// Writes an MP4 with an intra-only MPEG-4 Part 2 video track and, when `pcm` is not
// empty, an AAC mono track at `sample_rate`.
void write_mp4(const std::filesystem::path& path, const std::vector<RgbImage>& frames, int fps,
               const std::vector<std::int16_t>& pcm = {}, int sample_rate = 16000);

// Sine tone, 16-bit mono.
std::vector<std::int16_t> tone(double seconds, int sample_rate = 16000, double hz = 440.0);

// Fresh empty directory under the system temp dir; removed by the destructor.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Copies a fixture case tree into dest.
void copy_tree(const std::filesystem::path& from, const std::filesystem::path& dest);

// Copies tests/fixtures/<name> into dest and adds the media that is
// generated rather than checked in (ID115: two MP4s with audio;
// refusal_case: one JPEG next to the broken video).
void materialize_case(const std::string& name, const std::filesystem::path& dest);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mmv::testing
