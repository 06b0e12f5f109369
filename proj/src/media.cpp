#include "mmv/media.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include <opencv2/imgproc.hpp>
#include <opencv2/videoio.hpp>

extern "C" {
#include <libavcodec/avcodec.h>
#include <libavformat/avformat.h>
#include <libavutil/channel_layout.h>
#include <libswresample/swresample.h>
}

#include "mmv/error.hpp"
#include "mmv/process.hpp"

namespace mmv {

namespace {

constexpr auto kDecoderDeadline = std::chrono::minutes(10);

RgbImage frame_from_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) {
    std::memcpy(out.at(0, y), rgb.ptr<std::uint8_t>(y), static_cast<std::size_t>(rgb.cols) * 3);
  }
  return out;
}

std::string av_error_text(int err) {
  char buf[AV_ERROR_MAX_STRING_SIZE] = {};
  av_strerror(err, buf, sizeof buf);
  return buf;
}

struct FormatCloser {
  void operator()(AVFormatContext* p) const { avformat_close_input(&p); }
};
struct CodecCloser {
  void operator()(AVCodecContext* p) const { avcodec_free_context(&p); }
};
struct SwrCloser {
  void operator()(SwrContext* p) const { swr_free(&p); }
};
struct PacketCloser {
  void operator()(AVPacket* p) const { av_packet_free(&p); }
};
struct FrameCloser {
  void operator()(AVFrame* p) const { av_frame_free(&p); }
};

}  // namespace

int sample_stride_for(double native_fps, double sample_fps) {
  if (!(native_fps > 0.0) || !(sample_fps > 0.0)) return 1;
  return std::max(1, static_cast<int>(std::lround(native_fps / sample_fps)));
}

FrameSequence LibraryDecoder::decode_video(const std::filesystem::path& path, const std::string& asset_id,
                                           const DecodeOptions& options) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec) || std::filesystem::file_size(path, ec) == 0) {
    throw Error(Errc::DecodeFailure, "missing or empty video file " + path.string());
  }
  cv::VideoCapture capture(path.string(), cv::CAP_FFMPEG);
  if (!capture.isOpened()) throw Error(Errc::DecodeFailure, "cannot open video " + path.string());

  FrameSequence seq;
  seq.asset_id = asset_id;
  seq.native_fps = capture.get(cv::CAP_PROP_FPS);
  if (!(seq.native_fps > 0.0) || !std::isfinite(seq.native_fps)) {
    throw Error(Errc::DecodeFailure, "video reports no frame rate: " + path.string());
  }
  seq.sample_stride = sample_stride_for(seq.native_fps, options.sample_fps);

  std::int64_t index = 0;
  cv::Mat bgr;
  while (capture.grab()) {
    if (index % seq.sample_stride == 0) {
      if (!capture.retrieve(bgr) || bgr.empty()) break;
      RgbImage frame = shrink_to_fit(frame_from_mat(bgr), options.analysis_max_side);
      if (!seq.frames.empty() && !frame.same_size(seq.frames.front().image)) {
        frame = resize_longer_side(frame, std::max(seq.frames.front().image.width,
                                                   seq.frames.front().image.height));
      }
      seq.frames.push_back({FrameRef{asset_id, index, static_cast<double>(index) / seq.native_fps},
                            std::move(frame)});
    }
    ++index;
  }
  seq.native_frame_count = index;
  if (seq.frames.empty()) throw Error(Errc::DecodeFailure, "no decodable frames in " + path.string());
  return seq;
}

PcmStream LibraryDecoder::extract_audio(const std::filesystem::path& path, const std::string& asset_id) {
  AVFormatContext* raw_fmt = nullptr;
  if (int rc = avformat_open_input(&raw_fmt, path.c_str(), nullptr, nullptr); rc < 0) {
    throw Error(Errc::DecodeFailure, "cannot open " + path.string() + ": " + av_error_text(rc));
  }
  std::unique_ptr<AVFormatContext, FormatCloser> fmt(raw_fmt);
  if (int rc = avformat_find_stream_info(fmt.get(), nullptr); rc < 0) {
    throw Error(Errc::DecodeFailure, "no stream info in " + path.string() + ": " + av_error_text(rc));
  }

  PcmStream pcm;
  pcm.asset_id = asset_id;
  const int stream_index = av_find_best_stream(fmt.get(), AVMEDIA_TYPE_AUDIO, -1, -1, nullptr, 0);
  if (stream_index == AVERROR_STREAM_NOT_FOUND) {
    pcm.has_audio = false;
    return pcm;
  }
  if (stream_index < 0) {
    throw Error(Errc::DecodeFailure, "audio stream lookup failed: " + av_error_text(stream_index));
  }
  AVStream* stream = fmt->streams[stream_index];
  const AVCodec* codec = avcodec_find_decoder(stream->codecpar->codec_id);
  if (codec == nullptr) throw Error(Errc::DecodeFailure, "no decoder for the audio codec in " + path.string());

  std::unique_ptr<AVCodecContext, CodecCloser> ctx(avcodec_alloc_context3(codec));
  if (!ctx || avcodec_parameters_to_context(ctx.get(), stream->codecpar) < 0 ||
      avcodec_open2(ctx.get(), codec, nullptr) < 0) {
    throw Error(Errc::DecodeFailure, "cannot open the audio decoder for " + path.string());
  }

  const std::int64_t in_layout =
      ctx->channel_layout != 0 ? static_cast<std::int64_t>(ctx->channel_layout)
                               : av_get_default_channel_layout(ctx->channels);
  std::unique_ptr<SwrContext, SwrCloser> swr(
      swr_alloc_set_opts(nullptr, AV_CH_LAYOUT_MONO, AV_SAMPLE_FMT_S16, kPcmSampleRate, in_layout,
                         ctx->sample_fmt, ctx->sample_rate, 0, nullptr));
  if (!swr || swr_init(swr.get()) < 0) throw Error(Errc::DecodeFailure, "cannot set up audio resampling");

  auto append = [&](const std::uint8_t** data, int nb_samples) {
    const int capacity = swr_get_out_samples(swr.get(), nb_samples);
    if (capacity <= 0) return;
    const std::size_t old = pcm.samples.size();
    pcm.samples.resize(old + static_cast<std::size_t>(capacity));
    auto* out = reinterpret_cast<std::uint8_t*>(pcm.samples.data() + old);
    const int got = swr_convert(swr.get(), &out, capacity, data, nb_samples);
    if (got < 0) throw Error(Errc::DecodeFailure, "audio resampling failed");
    pcm.samples.resize(old + static_cast<std::size_t>(got));
  };

  std::unique_ptr<AVPacket, PacketCloser> packet(av_packet_alloc());
  std::unique_ptr<AVFrame, FrameCloser> frame(av_frame_alloc());
  auto drain = [&] {
    for (;;) {
      const int rc = avcodec_receive_frame(ctx.get(), frame.get());
      if (rc == AVERROR(EAGAIN) || rc == AVERROR_EOF) return;
      if (rc < 0) throw Error(Errc::DecodeFailure, "audio decode error: " + av_error_text(rc));
      append(const_cast<const std::uint8_t**>(frame->extended_data), frame->nb_samples);
      av_frame_unref(frame.get());
    }
  };

  while (av_read_frame(fmt.get(), packet.get()) >= 0) {
    if (packet->stream_index == stream_index) {
      const int rc = avcodec_send_packet(ctx.get(), packet.get());
      av_packet_unref(packet.get());
      if (rc < 0 && rc != AVERROR(EAGAIN)) {
        throw Error(Errc::DecodeFailure, "audio decode error: " + av_error_text(rc));
      }
      drain();
    } else {
      av_packet_unref(packet.get());
    }
  }
  avcodec_send_packet(ctx.get(), nullptr);
  drain();
  append(nullptr, 0);
  return pcm;
}

FrameSequence CommandDecoder::decode_video(const std::filesystem::path& path, const std::string& asset_id,
                                           const DecodeOptions& options) {
  auto child = ChildProcess::spawn({executable_, "video", path.string(), "--fps",
                                    std::to_string(options.sample_fps), "--max-side",
                                    std::to_string(options.analysis_max_side)});
  auto result = child.communicate(kDecoderDeadline);
  if (result.exit_code != 0) {
    throw Error(Errc::DecodeFailure, "decoder exited with " + std::to_string(result.exit_code) + ": " +
                                         result.err.substr(0, 500));
  }
  const auto nl = result.out.find('\n');
  if (nl == std::string::npos) throw Error(Errc::DecodeFailure, "decoder produced no header");
  std::istringstream header(result.out.substr(0, nl));
  std::string magic;
  int width = 0, height = 0, stride = 0;
  double fps = 0.0;
  std::int64_t native_frames = 0;
  header >> magic >> width >> height >> fps >> native_frames >> stride;
  if (!header || magic != "MMVRAW1" || width <= 0 || height <= 0 || !(fps > 0.0) || stride < 1) {
    throw Error(Errc::DecodeFailure, "malformed decoder header: " + result.out.substr(0, nl));
  }
  const std::size_t frame_bytes = static_cast<std::size_t>(width) * height * 3;
  const std::size_t payload = result.out.size() - nl - 1;
  if (payload == 0 || payload % frame_bytes != 0) {
    throw Error(Errc::DecodeFailure, "decoder payload is not a whole number of frames");
  }
  FrameSequence seq;
  seq.asset_id = asset_id;
  seq.native_fps = fps;
  seq.sample_stride = stride;
  seq.native_frame_count = native_frames;
  const char* data = result.out.data() + nl + 1;
  for (std::size_t k = 0; k < payload / frame_bytes; ++k) {
    RgbImage img(width, height);
    std::memcpy(img.pixels.data(), data + k * frame_bytes, frame_bytes);
    const auto index = static_cast<std::int64_t>(k) * stride;
    seq.frames.push_back({FrameRef{asset_id, index, static_cast<double>(index) / fps}, std::move(img)});
  }
  seq.native_frame_count = std::max(seq.native_frame_count, seq.frames.back().ref.frame_index + 1);
  return seq;
}

PcmStream CommandDecoder::extract_audio(const std::filesystem::path& path, const std::string& asset_id) {
  auto child = ChildProcess::spawn({executable_, "audio", path.string()});
  auto result = child.communicate(kDecoderDeadline);
  if (result.exit_code != 0) {
    throw Error(Errc::DecodeFailure, "decoder exited with " + std::to_string(result.exit_code) + ": " +
                                         result.err.substr(0, 500));
  }
  const auto nl = result.out.find('\n');
  if (nl == std::string::npos) throw Error(Errc::DecodeFailure, "decoder produced no header");
  std::istringstream header(result.out.substr(0, nl));
  std::string magic;
  int rate = 0, has_audio = 0;
  header >> magic >> rate >> has_audio;
  if (!header || magic != "MMVPCM1" || rate != kPcmSampleRate) {
    throw Error(Errc::DecodeFailure, "malformed or unsupported audio header: " + result.out.substr(0, nl));
  }
  PcmStream pcm;
  pcm.asset_id = asset_id;
  pcm.has_audio = has_audio != 0;
  const std::size_t payload = result.out.size() - nl - 1;
  pcm.samples.resize(payload / 2);
  // s16le on the wire; this build targets little-endian hosts.
  std::memcpy(pcm.samples.data(), result.out.data() + nl + 1, pcm.samples.size() * 2);
  return pcm;
}

std::unique_ptr<MediaDecoder> make_decoder(const std::string& decoder_path) {
  if (decoder_path.empty()) return std::make_unique<LibraryDecoder>();
  return std::make_unique<CommandDecoder>(decoder_path);
}

}  // namespace mmv
