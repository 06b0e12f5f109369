#include <catch_amalgamated.hpp>

#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <thread>

#include "fake_transport.hpp"
#include "mmv/audio.hpp"
#include "mmv/error.hpp"
#include "synth_media.hpp"

using namespace mmv;
using mmv::testing::TempDir;

namespace {

using Bounds = std::vector<std::pair<double, double>>;

Bounds bounds_of(const std::vector<AudioChunk>& chunks) {
  Bounds b;
  for (const auto& c : chunks) b.emplace_back(c.start_s, c.end_s);
  return b;
}

Bounds chunks_for_seconds(double seconds) {
  const auto n = static_cast<std::int64_t>(std::llround(seconds * kPcmSampleRate));
  return bounds_of(chunk_samples("a", n, kPcmSampleRate));
}

PcmStream stream_of(const std::string& id, double seconds) {
  PcmStream s;
  s.asset_id = id;
  s.samples = testing::tone(seconds);
  return s;
}

// Echoes "chunk-<index>"; fails the listed chunk indices; tracks concurrency.
class EchoClient final : public TranscriptionClient {
 public:
  std::set<int> fail_chunks;
  bool auth_fail = false;
  std::string detected = "ar";

  TranscriptionResponse transcribe(const TranscriptionRequest& request, std::span<const std::uint8_t> wav) override {
    {
      std::lock_guard lock(mu);
      requests.push_back(request);
      wav_sizes.push_back(wav.size());
      peak = std::max(peak, ++active);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    {
      std::lock_guard lock(mu);
      --active;
    }
    if (auth_fail) throw Error(Errc::AuthError, "bad key");
    if (fail_chunks.count(request.chunk.index)) throw Error(Errc::TransportError, "boom");
    return {"chunk-" + std::to_string(request.chunk.index), detected};
  }

  std::mutex mu;
  std::vector<TranscriptionRequest> requests;
  std::vector<std::size_t> wav_sizes;
  int active = 0;
  int peak = 0;
};

double tone_power(const std::vector<std::int16_t>& x, double hz, int rate) {
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double phase = 2.0 * std::numbers::pi * hz * static_cast<double>(n) / rate;
    re += x[n] * std::cos(phase);
    im -= x[n] * std::sin(phase);
  }
  return re * re + im * im;
}

}  // namespace

TEST_CASE("chunk table for the 30 second rule") {
  CHECK(chunks_for_seconds(0.0).empty());
  CHECK(chunks_for_seconds(0.5).empty());
  CHECK(chunks_for_seconds(1.0) == Bounds{{0, 1}});
  CHECK(chunks_for_seconds(29.9) == Bounds{{0, 29.9}});
  CHECK(chunks_for_seconds(30.0) == Bounds{{0, 30}});
  CHECK(chunks_for_seconds(30.5) == Bounds{{0, 30}});
  CHECK(chunks_for_seconds(59.0) == Bounds{{0, 30}, {30, 59}});
  CHECK(chunks_for_seconds(95.0) == Bounds{{0, 30}, {30, 60}, {60, 90}, {90, 95}});
  CHECK(chunks_for_seconds(90.5) == Bounds{{0, 30}, {30, 60}, {60, 90}});
}

TEST_CASE("chunks carry sample slices and indices") {
  const auto chunks = chunk_audio(stream_of("v.mp4", 65.0));
  REQUIRE(chunks.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(chunks[static_cast<std::size_t>(i)].index == i);
    CHECK(chunks[static_cast<std::size_t>(i)].asset_id == "v.mp4");
    CHECK(chunks[static_cast<std::size_t>(i)].sample_offset == i * 30 * kPcmSampleRate);
  }
  CHECK(chunks[2].sample_count == 5 * kPcmSampleRate);
  CHECK(chunk_audio(stream_of("v.mp4", 12.0), 5.0, 1.0).size() == 3);
}

TEST_CASE("chunks tile the stream for random durations") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> len(0, 400 * kPcmSampleRate);
  const double period = 1.0 / kPcmSampleRate;
  for (int t = 0; t < 500; ++t) {
    const std::int64_t n = t < 50 ? t * 7919 : len(rng);
    const auto chunks = chunk_samples("a", n, kPcmSampleRate);
    const double duration = static_cast<double>(n) / kPcmSampleRate;
    const double tail = std::fmod(duration, 30.0);
    const double covered = tail < 1.0 ? duration - tail : duration;
    CAPTURE(n, duration);
    double sum = 0.0;
    std::int64_t next_sample = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      const auto& c = chunks[i];
      CHECK(c.sample_offset == next_sample);
      next_sample += c.sample_count;
      CHECK(c.duration_s() <= 30.0);
      if (i + 1 < chunks.size()) CHECK(c.duration_s() == 30.0);
      if (i > 0) CHECK(c.start_s == chunks[i - 1].end_s);
      sum += c.duration_s();
    }
    CHECK(std::fabs(sum - covered) <= period);
  }
}

TEST_CASE("language hints") {
  for (const char* ok : {"auto", "ar", "ru", "en-US", "zh-Hant-TW", "EN"}) CHECK(is_valid_language_hint(ok));
  for (const char* bad : {"", "xx", "english", "en_US", "en--US", "-en"}) CHECK_FALSE(is_valid_language_hint(bad));
  CHECK(language_primary_subtag("en-US") == "en");
  CHECK(language_primary_subtag("AR") == "ar");
  CHECK(language_primary_subtag("auto") == "auto");
}

TEST_CASE("WAV encoding writes a canonical 44 byte header") {
  const std::vector<std::int16_t> samples = {0, 1, -1, 32767};
  const auto wav = encode_wav(samples, 16000);
  REQUIRE(wav.size() == 44 + 8);
  CHECK(std::string(wav.begin(), wav.begin() + 4) == "RIFF");
  CHECK(std::string(wav.begin() + 8, wav.begin() + 16) == "WAVEfmt ");
  auto u32 = [&](std::size_t at) {
    return wav[at] | (wav[at + 1] << 8) | (wav[at + 2] << 16) | (static_cast<std::uint32_t>(wav[at + 3]) << 24);
  };
  CHECK(u32(4) == 36 + 8);
  CHECK(u32(24) == 16000);
  CHECK(u32(28) == 32000);
  CHECK(u32(40) == 8);
  CHECK(wav[44 + 4] == 0xff);
  CHECK(wav[44 + 5] == 0xff);
  CHECK(wav[44 + 6] == 0xff);
  CHECK(wav[44 + 7] == 0x7f);
}

TEST_CASE("transcribe_case orders segments by chunk") {
  const PcmStream s = stream_of("v.mp4", 100.0);
  const std::vector<AssetAudio> assets = {{&s, chunk_audio(s)}};
  EchoClient client;
  const auto out = transcribe_case(assets, client, "auto", 3);
  REQUIRE(out.size() == 1);
  REQUIRE(out[0].segments.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(out[0].segments[static_cast<std::size_t>(i)].text == "chunk-" + std::to_string(i));
    CHECK(out[0].segments[static_cast<std::size_t>(i)].start_s == 30.0 * i);
  }
  CHECK(out[0].segments[3].end_s == 100.0);
  CHECK(out[0].language == "ar");
  CHECK(client.peak <= 3);
  for (std::size_t sz : client.wav_sizes) CHECK((sz == 44 + 30 * 32000 || sz == 44 + 10 * 32000));
}

TEST_CASE("a failed chunk leaves an empty segment with the error") {
  const PcmStream s = stream_of("v.mp4", 120.0);
  const std::vector<AssetAudio> assets = {{&s, chunk_audio(s)}};
  EchoClient client;
  client.fail_chunks = {2};
  const auto out = transcribe_case(assets, client, "auto", 2);
  REQUIRE(out[0].segments.size() == 4);
  CHECK(out[0].segments[0].text == "chunk-0");
  CHECK(out[0].segments[1].text == "chunk-1");
  CHECK(out[0].segments[2].text.empty());
  CHECK_THAT(out[0].segments[2].error, Catch::Matchers::ContainsSubstring("TransportError"));
  CHECK(out[0].segments[3].text == "chunk-3");
  CHECK(out[0].segments[3].error.empty());
}

TEST_CASE("an explicit language hint goes out on every request") {
  const PcmStream a = stream_of("a.mp4", 70.0);
  const PcmStream b = stream_of("b.mp4", 31.5);
  const std::vector<AssetAudio> assets = {{&a, chunk_audio(a)}, {&b, chunk_audio(b)}};
  EchoClient client;
  const auto out = transcribe_case(assets, client, "ar", 2);
  REQUIRE(client.requests.size() == 5);
  for (const auto& r : client.requests) CHECK(r.language_hint == "ar");
  CHECK(out[0].language == "ar");
  CHECK(out[1].segments.size() == 2);
  CHECK_THROWS_AS(transcribe_case(assets, client, "klingon", 2), Error);
}

TEST_CASE("authentication failure aborts transcription") {
  const PcmStream s = stream_of("v.mp4", 95.0);
  const std::vector<AssetAudio> assets = {{&s, chunk_audio(s)}};
  EchoClient client;
  client.auth_fail = true;
  try {
    transcribe_case(assets, client, "auto", 2);
    FAIL("expected AuthError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AuthError);
  }
  CHECK(client.requests.size() <= 2);
}

TEST_CASE("stub transcription client replays fixtures") {
  TempDir dir("stub-tx");
  testing::write_file(dir.path() / "transcripts.json",
                      R"({"v.mp4": {"language": "ru", "chunks": ["privet", {"error": "transport"}, {"error": "auth"}]}})");
  StubTranscriptionClient stub(dir.path());
  const std::vector<std::uint8_t> wav;
  AudioChunk c{"v.mp4", 0, 0, 30, 0, 0};
  CHECK(stub.transcribe({c, "auto"}, wav).text == "privet");
  CHECK(stub.transcribe({c, "auto"}, wav).detected_language == "ru");
  c.index = 1;
  CHECK_THROWS_AS(stub.transcribe({c, "auto"}, wav), Error);
  c.index = 2;
  try {
    stub.transcribe({c, "auto"}, wav);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AuthError);
  }
  c.asset_id = "other.mp4";
  CHECK_THROWS_AS(stub.transcribe({c, "auto"}, wav), Error);
  CHECK(stub.calls() == 5);
}

TEST_CASE("HTTP transcription client sends a multipart request") {
  auto transport = std::make_shared<testing::FakeTransport>();
  transport->push(200, R"({"text": "hello", "language": "russian"})");
  HttpTranscriptionClient client(transport, "https://api.example/v1/audio/transcriptions", "sk-test");
  const std::vector<std::int16_t> samples(160, 5);
  const auto wav = encode_wav(samples, 16000);
  const auto r = client.transcribe({AudioChunk{"v.mp4", 0, 0, 0.01, 0, 160}, "ar-EG"}, wav);
  CHECK(r.text == "hello");
  CHECK(r.detected_language == "russian");
  REQUIRE(transport->requests.size() == 1);
  const auto& req = transport->requests[0];
  CHECK(req.method == "POST");
  CHECK(req.url == "https://api.example/v1/audio/transcriptions");
  bool auth = false;
  for (const auto& [k, v] : req.headers) auth = auth || (k == "Authorization" && v == "Bearer sk-test");
  CHECK(auth);
  CHECK_THAT(req.body, Catch::Matchers::ContainsSubstring("name=\"model\"\r\n\r\nwhisper-1"));
  CHECK_THAT(req.body, Catch::Matchers::ContainsSubstring("name=\"language\"\r\n\r\nar\r\n"));
  CHECK_THAT(req.body, Catch::Matchers::ContainsSubstring(std::string(wav.begin(), wav.end())));

  transport->push(401, "{}");
  try {
    client.transcribe({AudioChunk{}, "auto"}, wav);
    FAIL("expected AuthError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::AuthError);
  }
  CHECK_THAT(transport->requests.back().body, !Catch::Matchers::ContainsSubstring("name=\"language\""));

  HttpTranscriptionClient keyless(transport, "https://api.example", "");
  CHECK_THROWS_AS(keyless.transcribe({AudioChunk{}, "auto"}, wav), Error);
}

TEST_CASE("extracted audio keeps duration and pitch") {
  TempDir dir("audio");
  const auto path = dir.path() / "tone.mp4";
  const std::vector<RgbImage> frames(95, testing::scene_frame(1, 32, 24));
  testing::write_mp4(path, frames, 1, testing::tone(95.0, 16000, 440.0));
  LibraryDecoder decoder;
  const PcmStream pcm = decoder.extract_audio(path, "tone.mp4");
  REQUIRE(pcm.has_audio);
  CHECK(std::fabs(pcm.duration_s() - 95.0) < 0.2);
  const auto chunks = chunk_audio(pcm);
  REQUIRE(chunks.size() == 4);
  CHECK(chunks[3].start_s == 90.0);

  // One second from the middle: 440 Hz dominates its neighbours.
  const std::vector<std::int16_t> window(pcm.samples.begin() + 40 * 16000, pcm.samples.begin() + 41 * 16000);
  const double at = tone_power(window, 440.0, 16000);
  for (double hz : {220.0, 330.0, 400.0, 480.0, 550.0, 880.0}) CHECK(at > 100.0 * tone_power(window, hz, 16000));

  const auto silent_path = dir.path() / "silent-track.mp4";
  testing::write_mp4(silent_path, std::vector<RgbImage>(4, testing::scene_frame(2, 32, 24)), 1,
                     std::vector<std::int16_t>(4 * 16000, 0));
  const PcmStream silent = decoder.extract_audio(silent_path, "silent-track.mp4");
  CHECK(silent.has_audio);
  CHECK(std::fabs(silent.duration_s() - 4.0) < 0.2);
  for (auto v : silent.samples) CHECK(std::abs(v) <= 1);
}
