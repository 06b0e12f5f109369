#include "mmv/http.hpp"

#include <algorithm>
#include <cctype>
#include <memory>

#include <curl/curl.h>

#include "mmv/error.hpp"

namespace mmv {

namespace {

struct CurlGlobal {
  CurlGlobal() { curl_global_init(CURL_GLOBAL_DEFAULT); }
  ~CurlGlobal() { curl_global_cleanup(); }
};

struct Sink {
  std::string* body;
  std::size_t max_bytes;
  bool truncated = false;
};

std::size_t on_data(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  auto* sink = static_cast<Sink*>(user);
  const std::size_t n = size * nmemb;
  if (sink->max_bytes == 0) {
    sink->body->append(ptr, n);
    return n;
  }
  const std::size_t room = sink->max_bytes - std::min(sink->max_bytes, sink->body->size());
  sink->body->append(ptr, std::min(room, n));
  if (n > room) {
    sink->truncated = true;
    return 0;  // aborts the transfer
  }
  return n;
}

}  // namespace

CurlTransport::CurlTransport() { static CurlGlobal global; }

HttpResponse CurlTransport::send(const HttpRequest& request) {
  std::unique_ptr<CURL, decltype(&curl_easy_cleanup)> curl(curl_easy_init(), curl_easy_cleanup);
  if (!curl) throw Error(Errc::TransportError, "curl_easy_init failed");

  HttpResponse response;
  Sink sink{&response.body, request.max_bytes};
  curl_slist* headers = nullptr;
  for (const auto& [k, v] : request.headers) headers = curl_slist_append(headers, (k + ": " + v).c_str());
  std::unique_ptr<curl_slist, decltype(&curl_slist_free_all)> header_guard(headers, curl_slist_free_all);

  CURL* h = curl.get();
  curl_easy_setopt(h, CURLOPT_URL, request.url.c_str());
  curl_easy_setopt(h, CURLOPT_CUSTOMREQUEST, request.method.c_str());
  curl_easy_setopt(h, CURLOPT_HTTPHEADER, headers);
  curl_easy_setopt(h, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(h, CURLOPT_MAXREDIRS, 5L);
  curl_easy_setopt(h, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(h, CURLOPT_TIMEOUT_MS, static_cast<long>(request.timeout.count()));
  curl_easy_setopt(h, CURLOPT_ACCEPT_ENCODING, "");
  curl_easy_setopt(h, CURLOPT_USERAGENT, "mmv/1.0");
  curl_easy_setopt(h, CURLOPT_WRITEFUNCTION, on_data);
  curl_easy_setopt(h, CURLOPT_WRITEDATA, &sink);
  if (!request.body.empty() || request.method == "POST") {
    curl_easy_setopt(h, CURLOPT_POSTFIELDS, request.body.data());
    curl_easy_setopt(h, CURLOPT_POSTFIELDSIZE_LARGE, static_cast<curl_off_t>(request.body.size()));
  }

  const CURLcode rc = curl_easy_perform(h);
  response.truncated = sink.truncated;
  if (rc != CURLE_OK && !(rc == CURLE_WRITE_ERROR && sink.truncated)) {
    throw Error(Errc::TransportError, request.url + ": " + curl_easy_strerror(rc));
  }
  curl_easy_getinfo(h, CURLINFO_RESPONSE_CODE, &response.status);
  char* ct = nullptr;
  if (curl_easy_getinfo(h, CURLINFO_CONTENT_TYPE, &ct) == CURLE_OK && ct != nullptr) response.content_type = ct;
  return response;
}

HttpResponse OfflineTransport::send(const HttpRequest& request) {
  throw Error(Errc::OfflineViolation, "network access refused in offline mode: " + request.url);
}

void throw_for_status(long status, const std::string& context, const std::string& body) {
  if (status >= 200 && status < 300) return;
  const std::string detail = context + ": HTTP " + std::to_string(status) + " " + body.substr(0, 200);
  if (status == 401 || status == 403) throw Error(Errc::AuthError, detail);
  if (status == 429) throw Error(Errc::RateLimited, detail);
  throw Error(Errc::TransportError, detail);
}

std::string url_host(const std::string& url) {
  std::string lower = url;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  std::size_t start;
  if (lower.rfind("http://", 0) == 0) {
    start = 7;
  } else if (lower.rfind("https://", 0) == 0) {
    start = 8;
  } else {
    return {};
  }
  std::size_t end = lower.find_first_of("/?#", start);
  if (end == std::string::npos) end = lower.size();
  std::string authority = lower.substr(start, end - start);
  if (const auto at = authority.rfind('@'); at != std::string::npos) authority.erase(0, at + 1);
  if (const auto colon = authority.rfind(':'); colon != std::string::npos && authority.find(']') == std::string::npos) {
    authority.erase(colon);
  }
  if (authority.empty()) return {};
  for (unsigned char c : authority) {
    if (!(std::isalnum(c) || c == '.' || c == '-' || c == '[' || c == ']' || c == ':')) return {};
  }
  return authority;
}

std::pair<std::string, std::string> multipart_body(const std::vector<MultipartPart>& parts) {
  const std::string boundary = "----mmv-boundary-7d1f0c2a9b";
  std::string body;
  for (const auto& p : parts) {
    body += "--" + boundary + "\r\n";
    body += "Content-Disposition: form-data; name=\"" + p.name + "\"";
    if (!p.filename.empty()) body += "; filename=\"" + p.filename + "\"";
    body += "\r\n";
    if (!p.content_type.empty()) body += "Content-Type: " + p.content_type + "\r\n";
    body += "\r\n" + p.data + "\r\n";
  }
  body += "--" + boundary + "--\r\n";
  return {body, "multipart/form-data; boundary=" + boundary};
}

}  // namespace mmv
