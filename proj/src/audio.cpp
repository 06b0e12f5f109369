#include "mmv/audio.hpp"

#include <algorithm>
#include <iterator>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <string_view>
#include <thread>

#include "mmv/error.hpp"

namespace mmv {

namespace {

// Languages accepted by the Whisper transcription API.
constexpr std::string_view kLanguages[] = {
    "af", "am", "ar", "as", "az", "ba", "be", "bg", "bn", "bo", "br", "bs", "ca", "cs", "cy", "da", "de",
    "el", "en", "es", "et", "eu", "fa", "fi", "fo", "fr", "gl", "gu", "ha", "haw", "he", "hi", "hr", "ht",
    "hu", "hy", "id", "is", "it", "ja", "jw", "ka", "kk", "km", "kn", "ko", "la", "lb", "ln", "lo", "lt",
    "lv", "mg", "mi", "mk", "ml", "mn", "mr", "ms", "mt", "my", "ne", "nl", "nn", "no", "oc", "pa", "pl",
    "ps", "pt", "ro", "ru", "sa", "sd", "si", "sk", "sl", "sn", "so", "sq", "sr", "su", "sv", "sw", "ta",
    "te", "tg", "th", "tk", "tl", "tr", "tt", "uk", "ur", "uz", "vi", "yi", "yo", "zh", "yue",
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

}  // namespace

std::vector<AudioChunk> chunk_samples(const std::string& asset_id, std::int64_t total_samples, int sample_rate,
                                      double chunk_seconds, double min_chunk_seconds) {
  if (sample_rate <= 0 || !(chunk_seconds > 0.0) || min_chunk_seconds < 0.0 || total_samples < 0) {
    throw Error(Errc::InvalidArgument, "bad chunking parameters");
  }
  const auto chunk_len = static_cast<std::int64_t>(std::llround(chunk_seconds * sample_rate));
  const auto min_len = static_cast<std::int64_t>(std::llround(min_chunk_seconds * sample_rate));
  std::vector<AudioChunk> out;
  for (std::int64_t offset = 0; offset < total_samples; offset += chunk_len) {
    const std::int64_t count = std::min(chunk_len, total_samples - offset);
    if (count < min_len) break;
    AudioChunk c;
    c.asset_id = asset_id;
    c.index = static_cast<int>(out.size());
    c.sample_offset = offset;
    c.sample_count = count;
    c.start_s = static_cast<double>(offset) / sample_rate;
    c.end_s = static_cast<double>(offset + count) / sample_rate;
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<AudioChunk> chunk_audio(const PcmStream& stream, double chunk_seconds, double min_chunk_seconds) {
  if (!stream.has_audio) return {};
  return chunk_samples(stream.asset_id, static_cast<std::int64_t>(stream.samples.size()), stream.sample_rate,
                       chunk_seconds, min_chunk_seconds);
}

bool is_valid_language_hint(const std::string& hint) {
  if (hint == "auto") return true;
  std::vector<std::string> subtags;
  std::size_t start = 0;
  while (true) {
    const std::size_t dash = hint.find('-', start);
    subtags.push_back(hint.substr(start, dash == std::string::npos ? std::string::npos : dash - start));
    if (dash == std::string::npos) break;
    start = dash + 1;
  }
  for (const auto& s : subtags) {
    if (s.empty() || s.size() > 8) return false;
    if (!std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c); })) return false;
  }
  const std::string primary = lower(subtags.front());
  return std::find(std::begin(kLanguages), std::end(kLanguages), primary) != std::end(kLanguages);
}

std::string language_primary_subtag(const std::string& hint) {
  if (hint == "auto") return hint;
  return lower(hint.substr(0, hint.find('-')));
}

std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples, int sample_rate) {
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto tag = [&](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  put_u32(out, 36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(sample_rate));
  put_u32(out, static_cast<std::uint32_t>(sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  tag("data");
  put_u32(out, data_bytes);
  for (std::int16_t s : samples) put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

HttpTranscriptionClient::HttpTranscriptionClient(std::shared_ptr<HttpTransport> transport, std::string endpoint,
                                                 std::string api_key, std::string model)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)) {}

TranscriptionResponse HttpTranscriptionClient::transcribe(const TranscriptionRequest& request,
                                                          std::span<const std::uint8_t> wav) {
  if (api_key_.empty()) throw Error(Errc::AuthError, "TRANSCRIBE_API_KEY is not set");
  std::vector<MultipartPart> parts{
      {"file", "chunk.wav", "audio/wav", std::string(wav.begin(), wav.end())},
      {"model", "", "", model_},
      {"response_format", "", "", "verbose_json"},
  };
  if (request.language_hint != "auto") {
    parts.push_back({"language", "", "", language_primary_subtag(request.language_hint)});
  }
  auto [body, content_type] = multipart_body(parts);
  HttpRequest http;
  http.method = "POST";
  http.url = endpoint_;
  http.headers = {{"Authorization", "Bearer " + api_key_}, {"Content-Type", content_type}};
  http.body = std::move(body);
  http.timeout = std::chrono::seconds(120);
  const HttpResponse r = transport_->send(http);
  throw_for_status(r.status, "transcription", r.body);
  const json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text")) {
    throw Error(Errc::TransportError, "transcription response is not the expected JSON");
  }
  return {j.value("text", std::string{}), j.value("language", std::string{})};
}

StubTranscriptionClient::StubTranscriptionClient(const std::filesystem::path& fixture_dir) {
  std::ifstream in(fixture_dir / "transcripts.json");
  if (in) fixtures_ = json::parse(in, nullptr, false);
  if (fixtures_.is_discarded() || !fixtures_.is_object()) fixtures_ = json::object();
}

TranscriptionResponse StubTranscriptionClient::transcribe(const TranscriptionRequest& request,
                                                          std::span<const std::uint8_t>) {
  ++calls_;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  const auto asset = fixtures_.find(request.chunk.asset_id);
  if (asset == fixtures_.end()) throw Error(Errc::TransportError, "no stub transcript for " + request.chunk.asset_id);
  const json& chunks = asset->at("chunks");
  const auto i = static_cast<std::size_t>(request.chunk.index);
  if (i >= chunks.size()) throw Error(Errc::TransportError, "no stub transcript for chunk " + std::to_string(i));
  const json& entry = chunks[i];
  if (entry.is_object() && entry.contains("error")) {
    const std::string kind = entry["error"].get<std::string>();
    if (kind == "auth") throw Error(Errc::AuthError, "stub: credentials rejected");
    if (kind == "rate_limit") throw Error(Errc::RateLimited, "stub: rate limited");
    throw Error(Errc::TransportError, "stub: chunk " + std::to_string(i) + " failed");
  }
  return {entry.get<std::string>(), asset->value("language", std::string{})};
}

std::vector<TranscriptionRequest> StubTranscriptionClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::vector<Transcript> transcribe_case(std::span<const AssetAudio> assets, TranscriptionClient& client,
                                        const std::string& language_hint, int max_in_flight) {
  if (!is_valid_language_hint(language_hint)) {
    throw Error(Errc::InvalidConfig, "unknown language hint '" + language_hint + "'");
  }
  struct Job {
    std::size_t asset;
    std::size_t chunk;
  };
  std::vector<Job> jobs;
  std::vector<Transcript> out(assets.size());
  for (std::size_t a = 0; a < assets.size(); ++a) {
    out[a].asset_id = assets[a].stream->asset_id;
    out[a].language = language_hint;
    out[a].segments.resize(assets[a].chunks.size());
    for (std::size_t c = 0; c < assets[a].chunks.size(); ++c) {
      const AudioChunk& ch = assets[a].chunks[c];
      out[a].segments[c].start_s = ch.start_s;
      out[a].segments[c].end_s = ch.end_s;
      jobs.push_back({a, c});
    }
  }

  std::vector<std::string> detected(assets.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    while (!abort) {
      const std::size_t j = next++;
      if (j >= jobs.size()) return;
      const AssetAudio& asset = assets[jobs[j].asset];
      const AudioChunk& chunk = asset.chunks[jobs[j].chunk];
      TranscriptSegment& seg = out[jobs[j].asset].segments[jobs[j].chunk];
      try {
        const auto first = asset.stream->samples.begin() + chunk.sample_offset;
        const auto wav = encode_wav(std::span<const std::int16_t>(first, first + chunk.sample_count),
                                    asset.stream->sample_rate);
        TranscriptionResponse r = client.transcribe({chunk, language_hint}, wav);
        seg.text = std::move(r.text);
        if (jobs[j].chunk == 0) detected[jobs[j].asset] = std::move(r.detected_language);
      } catch (const Error& e) {
        if (e.code() == Errc::AuthError) {
          std::lock_guard lock(fatal_mu);
          if (!fatal) fatal = std::current_exception();
          abort = true;
          return;
        }
        seg.error = e.what();
      } catch (const std::exception& e) {
        seg.error = e.what();
      }
    }
  };

  const auto n_workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, max_in_flight)), 1,
                                                 std::max<std::size_t>(1, jobs.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (fatal) std::rethrow_exception(fatal);

  for (std::size_t a = 0; a < out.size(); ++a) {
    if (language_hint == "auto" && !detected[a].empty()) out[a].language = detected[a];
  }
  return out;
}

}  // namespace mmv
