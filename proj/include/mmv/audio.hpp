#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "mmv/http.hpp"
#include "mmv/media.hpp"
#include "mmv/model.hpp"

namespace mmv {

// Consecutive hard-cut chunks of chunk_seconds; a final fragment shorter than
// min_chunk_seconds is dropped. Boundaries are whole samples.
std::vector<AudioChunk> chunk_audio(const PcmStream& stream, double chunk_seconds = 30.0,
                                    double min_chunk_seconds = 1.0);
std::vector<AudioChunk> chunk_samples(const std::string& asset_id, std::int64_t total_samples, int sample_rate,
                                      double chunk_seconds = 30.0, double min_chunk_seconds = 1.0);

// "auto", or a BCP-47 tag whose primary subtag is a language the
// transcription backend knows ("ar", "ru", "en-US", ...).
bool is_valid_language_hint(const std::string& hint);
// Primary subtag, lowercased ("en-US" -> "en"); "auto" stays "auto".
std::string language_primary_subtag(const std::string& hint);

struct TranscriptionRequest {
  AudioChunk chunk;
  std::string language_hint = "auto";
};

struct TranscriptionResponse {
  std::string text;
  std::string detected_language;
};

// Implementations must be safe for concurrent calls. Errors:
// TransportError / RateLimited per chunk, AuthError for bad credentials.
class TranscriptionClient {
 public:
  virtual ~TranscriptionClient() = default;
  // `wav` holds the chunk as a 16-bit mono RIFF/WAVE file.
  virtual TranscriptionResponse transcribe(const TranscriptionRequest& request,
                                           std::span<const std::uint8_t> wav) = 0;
};

// OpenAI-compatible /audio/transcriptions endpoint.
class HttpTranscriptionClient final : public TranscriptionClient {
 public:
  HttpTranscriptionClient(std::shared_ptr<HttpTransport> transport, std::string endpoint, std::string api_key,
                          std::string model = "whisper-1");
  TranscriptionResponse transcribe(const TranscriptionRequest& request, std::span<const std::uint8_t> wav) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string endpoint_;
  std::string api_key_;
  std::string model_;
};

// Canned responses from <dir>/transcripts.json:
//   {"<asset_id>": {"language": "ru", "chunks": ["text", {"error": "transport"}, ...]}}
// Chunks past the end of the list, and unknown assets, fail with TransportError.
class StubTranscriptionClient final : public TranscriptionClient {
 public:
  explicit StubTranscriptionClient(const std::filesystem::path& fixture_dir);
  TranscriptionResponse transcribe(const TranscriptionRequest& request, std::span<const std::uint8_t> wav) override;

  int calls() const { return calls_.load(); }
  std::vector<TranscriptionRequest> requests() const;

 private:
  json fixtures_;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<TranscriptionRequest> requests_;
};

std::vector<std::uint8_t> encode_wav(std::span<const std::int16_t> samples, int sample_rate);

struct AssetAudio {
  const PcmStream* stream = nullptr;
  std::vector<AudioChunk> chunks;
};

// One request per chunk, up to max_in_flight at a time; segments come back in
// chunk order with chunk boundaries as timestamps. A failed chunk becomes an
// empty segment carrying the error. AuthError aborts and is rethrown.
std::vector<Transcript> transcribe_case(std::span<const AssetAudio> assets, TranscriptionClient& client,
                                        const std::string& language_hint, int max_in_flight = 2);

}  // namespace mmv
