#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace mmv {

struct HttpRequest {
  std::string method = "GET";
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{15000};
  // 0 = unlimited. Bodies beyond this are cut and flagged as truncated.
  std::size_t max_bytes = 0;
};

struct HttpResponse {
  long status = 0;
  std::string body;
  std::string content_type;
  bool truncated = false;
};

// Every outbound network operation goes through one of these. Throws
// Error{TransportError} when no HTTP response was obtained.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse send(const HttpRequest& request) = 0;
};

class CurlTransport final : public HttpTransport {
 public:
  CurlTransport();
  HttpResponse send(const HttpRequest& request) override;
};

// Installed in offline mode. Throws Error{OfflineViolation} on every call.
class OfflineTransport final : public HttpTransport {
 public:
  HttpResponse send(const HttpRequest& request) override;
};

// Status to error mapping shared by the API clients: 401/403 AuthError,
// 429 RateLimited, anything else outside 2xx TransportError.
void throw_for_status(long status, const std::string& context, const std::string& body);

// Host part of an http(s) URL, lowercased; empty when the URL is not valid.
std::string url_host(const std::string& url);

struct MultipartPart {
  std::string name;
  std::string filename;  // empty for plain fields
  std::string content_type;
  std::string data;
};

// multipart/form-data body; returns {body, content-type header value}.
std::pair<std::string, std::string> multipart_body(const std::vector<MultipartPart>& parts);

}  // namespace mmv
