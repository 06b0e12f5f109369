#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mmv/shots.hpp"

namespace mmv {

inline constexpr int kPcmSampleRate = 16000;

// 16 kHz mono signed 16-bit PCM. has_audio=false is the NoAudio marker for
// containers without an audio track.
struct PcmStream {
  std::string asset_id;
  int sample_rate = kPcmSampleRate;
  bool has_audio = true;
  std::vector<std::int16_t> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct DecodeOptions {
  double sample_fps = 2.0;
  // Analysis frames are shrunk so their longer side is at most this.
  int analysis_max_side = 480;
};

// Media decoding sits behind this interface so the pipeline never depends on
// one decoder vendor. Both calls throw Error{DecodeFailure}.
class MediaDecoder {
 public:
  virtual ~MediaDecoder() = default;
  virtual FrameSequence decode_video(const std::filesystem::path& path, const std::string& asset_id,
                                     const DecodeOptions& options) = 0;
  virtual PcmStream extract_audio(const std::filesystem::path& path, const std::string& asset_id) = 0;
};

// In-process decoding: OpenCV for frames, libavformat/libavcodec for audio.
class LibraryDecoder final : public MediaDecoder {
 public:
  FrameSequence decode_video(const std::filesystem::path& path, const std::string& asset_id,
                             const DecodeOptions& options) override;
  PcmStream extract_audio(const std::filesystem::path& path, const std::string& asset_id) override;
};

// Runs an external decoder executable (see docs/decoder-protocol.md):
//   <exe> video <path> --fps <f> --max-side <n>
//     stdout: "MMVRAW1 <w> <h> <native_fps> <native_frames> <stride>\n" + raw RGB frames
//   <exe> audio <path>
//     stdout: "MMVPCM1 <rate> <has_audio>\n" + s16le mono samples
class CommandDecoder final : public MediaDecoder {
 public:
  explicit CommandDecoder(std::string executable) : executable_(std::move(executable)) {}

  FrameSequence decode_video(const std::filesystem::path& path, const std::string& asset_id,
                             const DecodeOptions& options) override;
  PcmStream extract_audio(const std::filesystem::path& path, const std::string& asset_id) override;

 private:
  std::string executable_;
};

// Empty decoder_path selects the in-process decoder.
std::unique_ptr<MediaDecoder> make_decoder(const std::string& decoder_path);

// Stride used to sample native_fps down to sample_fps.
int sample_stride_for(double native_fps, double sample_fps);

}  // namespace mmv
