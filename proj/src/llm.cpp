#include "mmv/llm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "mmv/error.hpp"
#include "mmv/image.hpp"

namespace mmv {

namespace {

constexpr std::string_view kRefusalPhrases[] = {
    "i'm sorry",          "i am sorry",       "i apologize",       "i can't help",       "i cannot help",
    "i can't assist",     "i cannot assist",  "i'm unable to",     "i am unable to",     "i can't comply",
    "i cannot comply",    "i won't be able",  "i can't provide",   "i cannot provide",   "i must decline",
    "i'm not able to",    "i am not able to", "as an ai language", "can't process this", "cannot process this",
};

std::string normalize_for_match(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    // U+2019 RIGHT SINGLE QUOTATION MARK reads as an apostrophe.
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      out += '\'';
      i += 2;
      continue;
    }
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
  }
  return out;
}

std::string strip_code_fences(std::string_view text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t eol = text.find('\n', i);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(i, eol - i);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos || line.compare(first, 3, "```") != 0) {
      out.append(line);
      if (eol < text.size()) out += '\n';
    }
    i = eol + 1;
  }
  return out;
}

LlmReply reply_from_json(const json& r) {
  if (r.contains("error")) {
    const std::string kind = r["error"].get<std::string>();
    if (kind == "auth") throw Error(Errc::AuthError, "stub: credentials rejected");
    if (kind == "rate_limit") throw Error(Errc::RateLimited, "stub: rate limited");
    throw Error(Errc::TransportError, "stub: transport failure");
  }
  LlmReply reply;
  reply.text = r.value("text", std::string{});
  reply.finish_reason = r.value("finish_reason", std::string("stop"));
  reply.content_filter = r.value("content_filter", false) || reply.finish_reason == "content_filter";
  return reply;
}

}  // namespace

void RateLimiter::acquire(const Sleeper& sleep) {
  using Clock = std::chrono::steady_clock;
  Clock::duration wait{0};
  {
    std::lock_guard lock(mu_);
    const auto now = Clock::now();
    const auto start = std::max(now, next_);
    next_ = start + interval_;
    wait = start - now;
  }
  if (wait > Clock::duration::zero() && sleep) sleep(std::chrono::ceil<std::chrono::milliseconds>(wait));
}

HttpLlmClient::HttpLlmClient(std::shared_ptr<HttpTransport> transport, std::string endpoint, std::string api_key,
                             std::string model, std::shared_ptr<RateLimiter> limiter)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      model_(std::move(model)),
      limiter_(std::move(limiter)) {}

json HttpLlmClient::request_body(const LlmRequest& request) const {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", request.user}});
  for (const auto& img : request.images) {
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", "data:" + img.media_type + ";base64," + img.base64}}}});
  }
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", content}});
  return {{"model", model_}, {"messages", messages}, {"temperature", 0}};
}

LlmReply HttpLlmClient::complete(const LlmRequest& request) {
  if (api_key_.empty()) throw Error(Errc::AuthError, "LLM_API_KEY is not set");
  if (limiter_) limiter_->acquire();
  HttpRequest http;
  http.method = "POST";
  http.url = endpoint_;
  http.headers = {{"Authorization", "Bearer " + api_key_}, {"Content-Type", "application/json"}};
  http.body = request_body(request).dump(-1, ' ', false, json::error_handler_t::replace);
  http.timeout = std::chrono::seconds(180);
  const HttpResponse r = transport_->send(http);

  LlmReply reply;
  if (r.status == 400 && r.body.find("content_filter") != std::string::npos) {
    reply.finish_reason = "content_filter";
    reply.content_filter = true;
    return reply;
  }
  throw_for_status(r.status, "llm", r.body);
  const json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
    throw Error(Errc::TransportError, "llm response has no choices");
  }
  const json& choice = j["choices"][0];
  const json& message = choice.value("message", json::object());
  if (message.contains("content") && message["content"].is_string()) reply.text = message["content"];
  reply.finish_reason = choice.value("finish_reason", std::string{});
  reply.content_filter = reply.finish_reason == "content_filter" ||
                         (message.contains("refusal") && !message["refusal"].is_null());
  if (j.contains("usage")) {
    reply.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    reply.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  return reply;
}

std::string request_hash(const LlmRequest& request) {
  std::string material = request.system;
  material += '\x1f';
  material += request.user;
  for (const auto& img : request.images) {
    material += '\x1f';
    material += img.media_type;
    material += ':';
    material += img.base64;
  }
  return sha256_hex(material);
}

StubLlmClient::StubLlmClient(const std::filesystem::path& fixture_dir) {
  std::ifstream in(fixture_dir / "llm.json");
  if (in) fixtures_ = json::parse(in, nullptr, false);
  if (fixtures_.is_discarded() || !fixtures_.is_object()) fixtures_ = json::object();
}

StubLlmClient::StubLlmClient(json fixtures) : fixtures_(std::move(fixtures)) {
  if (!fixtures_.is_object()) fixtures_ = json::object();
}

LlmReply StubLlmClient::complete(const LlmRequest& request) {
  ++calls_;
  const std::string hash = request_hash(request);
  const json* list = nullptr;
  std::string key;
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (fixtures_.contains("by_hash") && fixtures_["by_hash"].contains(hash)) {
    list = &fixtures_["by_hash"][hash];
    key = "hash:" + hash;
  } else if (fixtures_.contains("by_purpose") && fixtures_["by_purpose"].contains(request.purpose)) {
    list = &fixtures_["by_purpose"][request.purpose];
    key = "purpose:" + request.purpose;
  } else if (fixtures_.contains("default")) {
    list = &fixtures_["default"];
    key = "default";
  }
  if (list == nullptr || !list->is_array() || list->empty()) {
    throw Error(Errc::TransportError, "stub: no reply for " + request.purpose + " (" + hash + ")");
  }
  std::size_t& pos = cursor_[key];
  const json& entry = (*list)[std::min(pos, list->size() - 1)];
  ++pos;
  return reply_from_json(entry);
}

std::vector<LlmRequest> StubLlmClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

bool contains_refusal_phrase(std::string_view text) {
  const std::string norm = normalize_for_match(text);
  return std::any_of(std::begin(kRefusalPhrases), std::end(kRefusalPhrases),
                     [&](std::string_view p) { return norm.find(p) != std::string::npos; });
}

std::optional<json> find_json_object(std::string_view text) {
  const std::string clean = strip_code_fences(text);
  for (std::size_t start = clean.find('{'); start != std::string::npos; start = clean.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t end = std::string::npos;
    for (std::size_t i = start; i < clean.size(); ++i) {
      const char c = clean[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        end = i;
        break;
      }
    }
    if (end == std::string::npos) continue;
    json j = json::parse(clean.begin() + static_cast<std::ptrdiff_t>(start),
                         clean.begin() + static_cast<std::ptrdiff_t>(end) + 1, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

LlmResponse call_llm(const LlmRequest& request, LlmClient& client, const RetryPolicy& policy, const Sleeper& sleep) {
  LlmResponse response;
  LlmReply reply;
  try {
    reply = with_retries(
        policy, {Errc::RateLimited, Errc::TransportError}, sleep, [&] { return client.complete(request); },
        &response.attempts);
  } catch (const Error& e) {
    if (e.code() == Errc::RateLimited || e.code() == Errc::TransportError) {
      throw Error(Errc::ExhaustedRetries,
                  "llm " + request.purpose + " failed after " + std::to_string(response.attempts) + " attempt(s): " +
                      e.what());
    }
    throw;
  }
  response.raw_text = std::move(reply.text);
  response.usage = reply.usage;
  std::optional<json> parsed = find_json_object(response.raw_text);
  response.refusal = reply.content_filter || (!parsed && contains_refusal_phrase(response.raw_text));
  if (!response.refusal) response.parsed_json = std::move(parsed);
  return response;
}

}  // namespace mmv
