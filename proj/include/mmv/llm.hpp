#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/http.hpp"
#include "mmv/model.hpp"
#include "mmv/retry.hpp"

namespace mmv {

struct ImageAttachment {
  std::string media_type = "image/jpeg";
  std::string base64;
};

struct LlmRequest {
  std::string purpose;  // "cross_validation", "forensic"; used by stubs and logs only
  std::string system;
  std::string user;
  std::vector<ImageAttachment> images;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct LlmReply {
  std::string text;
  std::string finish_reason;
  bool content_filter = false;
  TokenUsage usage;
};

// Must be safe for concurrent use. Errors: AuthError, RateLimited,
// TransportError.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual LlmReply complete(const LlmRequest& request) = 0;
};

// Spaces requests at least `interval` apart across every holder.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds interval) : interval_(interval) {}
  void acquire(const Sleeper& sleep = real_sleep);

 private:
  std::chrono::milliseconds interval_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point next_{};
};

// OpenAI-compatible chat completions with image_url data URIs.
class HttpLlmClient final : public LlmClient {
 public:
  HttpLlmClient(std::shared_ptr<HttpTransport> transport, std::string endpoint, std::string api_key, std::string model,
                std::shared_ptr<RateLimiter> limiter = nullptr);
  LlmReply complete(const LlmRequest& request) override;

  // Request body as sent; exposed for tests.
  json request_body(const LlmRequest& request) const;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string endpoint_;
  std::string api_key_;
  std::string model_;
  std::shared_ptr<RateLimiter> limiter_;
};

// SHA-256 over system, user and attachments; the stub's lookup key.
std::string request_hash(const LlmRequest& request);

// Canned replies from <dir>/llm.json:
//   {"by_hash": {"<sha256>": [reply...]}, "by_purpose": {"forensic": [reply...]}, "default": [reply...]}
// reply = {"text": "...", "finish_reason"?: "...", "content_filter"?: bool}
//       | {"error": "rate_limit" | "transport" | "auth"}
// Each key serves its list in order and repeats the last entry when exhausted.
class StubLlmClient final : public LlmClient {
 public:
  explicit StubLlmClient(const std::filesystem::path& fixture_dir);
  explicit StubLlmClient(json fixtures);
  LlmReply complete(const LlmRequest& request) override;

  int calls() const { return calls_.load(); }
  std::vector<LlmRequest> requests() const;

 private:
  json fixtures_;
  std::map<std::string, std::size_t> cursor_;
  std::atomic<int> calls_{0};
  mutable std::mutex mu_;
  std::vector<LlmRequest> requests_;
};

struct LlmResponse {
  std::string raw_text;
  std::optional<json> parsed_json;  // first JSON object in the text; absent on refusal
  bool refusal = false;
  TokenUsage usage;
  int attempts = 0;
};

bool contains_refusal_phrase(std::string_view text);

// First balanced top-level {...} that parses as JSON, after stripping code
// fences. Never throws.
std::optional<json> find_json_object(std::string_view text);

// Retries RateLimited/TransportError per policy. Throws Error{AuthError} at
// once and Error{ExhaustedRetries} when attempts run out.
LlmResponse call_llm(const LlmRequest& request, LlmClient& client, const RetryPolicy& policy = {},
                     const Sleeper& sleep = real_sleep);

}  // namespace mmv
