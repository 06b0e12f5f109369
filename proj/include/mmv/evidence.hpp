#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/http.hpp"
#include "mmv/model.hpp"
#include "mmv/retry.hpp"

namespace mmv {

inline constexpr std::string_view kStopwordsVersion = "en-2024.1";
inline constexpr int kDefaultSearchK = 10;
inline constexpr int kMaxKeywords = 12;

bool is_stopword(std::string_view lowercase_word);

struct SearchQuery {
  std::vector<std::string> keywords;
  std::optional<std::string> exact_phrase;

  // Query string sent to the engine: the quoted phrase, then the keywords.
  std::string text() const;
  bool operator==(const SearchQuery&) const = default;
};

// Throws Error{NoKeywords} when nothing survives stopword removal.
SearchQuery extract_keywords(std::string_view title, std::string_view description);

struct SearchResult {
  std::string link;
  std::string title;
  std::string snippet;
  std::optional<std::string> date;
  int rank = 0;
  bool exact_match = false;

  bool operator==(const SearchResult&) const = default;
};

// Errors: QuotaExceeded, RateLimited, TransportError, AuthError.
class SearchClient {
 public:
  virtual ~SearchClient() = default;
  virtual std::vector<SearchResult> search(const SearchQuery& query, int k) = 0;
};

// Google Custom Search JSON shape ({"items": [{link, title, snippet}]}). The
// endpoint may carry fixed parameters such as cx.
class HttpSearchClient final : public SearchClient {
 public:
  HttpSearchClient(std::shared_ptr<HttpTransport> transport, std::string endpoint, std::string api_key);
  std::vector<SearchResult> search(const SearchQuery& query, int k) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::string endpoint_;
  std::string api_key_;
};

// <dir>/search.json: {"fail_first": ["rate_limit", "quota", "transport"],
// "results": [{link, title, snippet, date?}]}. Each call consumes one
// fail_first entry before results are served.
class StubSearchClient final : public SearchClient {
 public:
  explicit StubSearchClient(const std::filesystem::path& fixture_dir);
  StubSearchClient(std::vector<SearchResult> results, std::vector<std::string> fail_first = {});
  std::vector<SearchResult> search(const SearchQuery& query, int k) override;

  int calls() const { return calls_.load(); }

 private:
  std::vector<SearchResult> results_;
  std::vector<std::string> fail_first_;
  std::atomic<int> calls_{0};
  std::mutex mu_;
};

// Stable partition: results whose title or snippet contains the phrase
// verbatim move ahead. Ranks are rewritten 1..n.
std::vector<SearchResult> promote_exact_matches(std::vector<SearchResult> results,
                                                const std::optional<std::string>& phrase);

struct SearchOutcome {
  std::vector<SearchResult> results;
  int attempts = 0;
  std::string error;  // set when every attempt failed
};

// At most k results, promoted and ranked. Quota, rate-limit and transport
// errors are retried per policy, then reported in `error` with no results.
SearchOutcome search(const SearchQuery& query, int k, SearchClient& client, const RetryPolicy& policy = {},
                     const Sleeper& sleep = real_sleep);

struct FetchedPage {
  std::string title;
  std::string text;
  bool truncated = false;
};

// Errors of any kind mean "failed to fetch"; callers never see them.
class PageFetcher {
 public:
  virtual ~PageFetcher() = default;
  virtual FetchedPage fetch(const std::string& link) = 0;
};

class HttpPageFetcher final : public PageFetcher {
 public:
  explicit HttpPageFetcher(std::shared_ptr<HttpTransport> transport,
                           std::chrono::milliseconds timeout = std::chrono::seconds(15),
                           std::size_t max_bytes = 2 * 1024 * 1024);
  FetchedPage fetch(const std::string& link) override;

 private:
  std::shared_ptr<HttpTransport> transport_;
  std::chrono::milliseconds timeout_;
  std::size_t max_bytes_;
};

// <dir>/pages.json maps link -> file name under <dir>/pages/. Unlisted links
// fail. Pages are run through the same HTML extraction as live fetches.
class StubPageFetcher final : public PageFetcher {
 public:
  explicit StubPageFetcher(const std::filesystem::path& fixture_dir, std::size_t max_bytes = 2 * 1024 * 1024);
  FetchedPage fetch(const std::string& link) override;

  int calls() const { return calls_.load(); }

 private:
  std::filesystem::path dir_;
  json index_;
  std::size_t max_bytes_;
  std::atomic<int> calls_{0};
};

// Readable text from an HTML document: script/style and nav/header/footer/
// aside dropped, then blocks whose text is mostly link text dropped.
std::string html_to_text(std::string_view html);
std::string html_title(std::string_view html);
std::string decode_html_entities(std::string_view text);

std::string truncation_note(std::size_t max_bytes);

// Never throws. Any failure yields content == kFetchFailedMarker.
SourceDocument fetch_content(const SearchResult& result, PageFetcher& fetcher, std::size_t max_bytes);

struct EvidenceBuffer {
  std::string case_id;
  std::vector<SourceDocument> documents;
  std::string fetched_at;  // ISO-8601 UTC

  bool operator==(const EvidenceBuffer&) const = default;
};

struct FetchOptions {
  int max_in_flight = 4;
  std::chrono::milliseconds politeness_delay{1000};
  std::size_t max_bytes = 2 * 1024 * 1024;
};

// Fetches every result (bounded concurrency, per-host spacing) and returns
// the documents in input order.
EvidenceBuffer build_evidence_buffer(const std::string& case_id, std::span<const SearchResult> results,
                                     PageFetcher& fetcher, const FetchOptions& options = {},
                                     const Sleeper& sleep = real_sleep);

// evidence.json holds the document array; evidence.meta.json holds case_id,
// fetched_at and status notes. Throws Error{PersistFailure}.
void write_evidence(const std::filesystem::path& dir, const EvidenceBuffer& buffer,
                    const std::vector<std::string>& notes);
struct StoredEvidence {
  EvidenceBuffer buffer;
  std::vector<std::string> notes;
};
std::optional<StoredEvidence> read_evidence(const std::filesystem::path& dir);

struct RetrievalOptions {
  int k = kDefaultSearchK;
  bool refresh = false;
  RetryPolicy retry;
  FetchOptions fetch;
};

struct RetrievalOutcome {
  EvidenceBuffer buffer;
  std::vector<std::string> notes;  // e.g. "no external sources"
  bool from_cache = false;
};

// Keyword extraction, search and crawl; reuses evidence.json under case_dir
// unless refresh. The media link, when present, is fetched as rank 0.
// Nothing is written.
RetrievalOutcome gather_evidence(const Case& c, const std::filesystem::path& case_dir, SearchClient& search_client,
                                 PageFetcher& fetcher, const RetrievalOptions& options,
                                 const Sleeper& sleep = real_sleep);

// gather_evidence, then write_evidence for a fresh buffer.
RetrievalOutcome retrieve_evidence(const Case& c, const std::filesystem::path& case_dir, SearchClient& search_client,
                                   PageFetcher& fetcher, const RetrievalOptions& options,
                                   const Sleeper& sleep = real_sleep);

std::string utc_timestamp_now();

}  // namespace mmv
