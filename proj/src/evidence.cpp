#include "mmv/evidence.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <map>
#include <thread>

#include "mmv/error.hpp"

namespace mmv {

namespace {

bool word_byte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

struct Token {
  std::string text;
  bool space_gap = true;  // only whitespace separates it from the previous token
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  bool clean_gap = true;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!word_byte(c)) {
      if (!std::isspace(c)) clean_gap = false;
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && word_byte(static_cast<unsigned char>(text[i]))) ++i;
    out.push_back({std::string(text.substr(start, i - start)), clean_gap});
    clean_gap = true;
  }
  return out;
}

// Multiword runs of capitalized, non-stopword tokens, in source order.
std::vector<std::vector<std::string>> capitalized_spans(const std::vector<Token>& tokens) {
  std::vector<std::vector<std::string>> spans;
  std::vector<std::string> run;
  auto close = [&] {
    if (run.size() >= 2) spans.push_back(run);
    run.clear();
  };
  for (const Token& t : tokens) {
    const bool capital = std::isupper(static_cast<unsigned char>(t.text.front())) != 0;
    if (!capital || is_stopword(ascii_lower(t.text))) {
      close();
      continue;
    }
    if (!t.space_gap) close();
    run.push_back(t.text);
  }
  close();
  return spans;
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x110000) {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(c);
  }
  return out;
}

bool iequals_at(std::string_view hay, std::size_t pos, std::string_view needle) {
  if (pos + needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i < needle.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(hay[pos + i])) != needle[i]) return false;
  }
  return true;
}

std::size_t ifind(std::string_view hay, std::string_view lower_needle, std::size_t from) {
  for (std::size_t i = from; i + lower_needle.size() <= hay.size(); ++i) {
    if (iequals_at(hay, i, lower_needle)) return i;
  }
  return std::string_view::npos;
}

bool is_block_tag(std::string_view tag) {
  static const char* const kBlocks[] = {"address", "article", "blockquote", "br",  "dd",     "div",  "dl",
                                        "dt",      "figcaption", "figure",  "h1",  "h2",     "h3",   "h4",
                                        "h5",      "h6",      "hr",         "li",  "main",   "ol",   "p",
                                        "pre",     "section", "table",      "td",  "th",     "tr",   "ul"};
  return std::any_of(std::begin(kBlocks), std::end(kBlocks), [&](const char* b) { return tag == b; });
}

bool is_boilerplate_tag(std::string_view tag) {
  return tag == "nav" || tag == "header" || tag == "footer" || tag == "aside" || tag == "form" ||
         tag == "menu";
}

bool is_skipped_tag(std::string_view tag) {
  return tag == "script" || tag == "style" || tag == "noscript" || tag == "template" || tag == "svg" ||
         tag == "head" || tag == "iframe";
}

std::string percent_encode(std::string_view s) {
  static const char* const kHex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 15];
    }
  }
  return out;
}

SearchResult result_from_json(const json& j) {
  SearchResult r;
  r.link = j.value("link", std::string{});
  r.title = j.value("title", std::string{});
  r.snippet = j.value("snippet", std::string{});
  if (j.contains("date") && j["date"].is_string()) r.date = j["date"].get<std::string>();
  return r;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

FetchedPage page_from_body(const std::string& body, const std::string& content_type, bool truncated) {
  FetchedPage page;
  page.truncated = truncated;
  const std::string ct = ascii_lower(content_type);
  if (ct.empty() || contains(ct, "html") || contains(ct, "xml")) {
    page.title = html_title(body);
    page.text = html_to_text(body);
  } else if (contains(ct, "text/")) {
    page.text = collapse_whitespace(body);
  } else {
    throw Error(Errc::TransportError, "unsupported content type " + content_type);
  }
  return page;
}

}  // namespace

std::string SearchQuery::text() const {
  std::string out;
  if (exact_phrase) out = "\"" + *exact_phrase + "\"";
  for (const auto& k : keywords) {
    if (!out.empty()) out += ' ';
    out += k;
  }
  return out;
}

SearchQuery extract_keywords(std::string_view title, std::string_view description) {
  SearchQuery q;
  std::vector<std::vector<std::string>> spans;
  for (std::string_view source : {title, description}) {
    const auto tokens = tokenize(source);
    for (auto& s : capitalized_spans(tokens)) spans.push_back(std::move(s));
    for (const Token& t : tokens) {
      std::string w = ascii_lower(t.text);
      if (w.size() < 2 || is_stopword(w)) continue;
      if (std::find(q.keywords.begin(), q.keywords.end(), w) != q.keywords.end()) continue;
      if (q.keywords.size() < static_cast<std::size_t>(kMaxKeywords)) q.keywords.push_back(std::move(w));
    }
  }
  const std::vector<std::string>* best = nullptr;
  for (const auto& s : spans) {
    if (best == nullptr || s.size() > best->size()) best = &s;
  }
  if (best != nullptr) {
    std::string phrase;
    for (const auto& w : *best) phrase += (phrase.empty() ? "" : " ") + w;
    q.exact_phrase = std::move(phrase);
  }
  if (q.keywords.empty() && !q.exact_phrase) throw Error(Errc::NoKeywords, "title and description reduce to nothing");
  return q;
}

HttpSearchClient::HttpSearchClient(std::shared_ptr<HttpTransport> transport, std::string endpoint, std::string api_key)
    : transport_(std::move(transport)), endpoint_(std::move(endpoint)), api_key_(std::move(api_key)) {}

std::vector<SearchResult> HttpSearchClient::search(const SearchQuery& query, int k) {
  if (api_key_.empty()) throw Error(Errc::AuthError, "SEARCH_API_KEY is not set");
  HttpRequest req;
  req.url = endpoint_ + (endpoint_.find('?') == std::string::npos ? "?" : "&") + "key=" + percent_encode(api_key_) +
            "&q=" + percent_encode(query.text()) + "&num=" + std::to_string(std::clamp(k, 1, 10));
  const HttpResponse r = transport_->send(req);
  if ((r.status == 403 || r.status == 429) && (contains(r.body, "quota") || contains(r.body, "Quota") ||
                                               contains(r.body, "dailyLimitExceeded"))) {
    throw Error(Errc::QuotaExceeded, "search quota exhausted");
  }
  throw_for_status(r.status, "search", r.body);
  const json j = json::parse(r.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(Errc::TransportError, "search response is not JSON");
  std::vector<SearchResult> out;
  for (const auto& item : j.value("items", json::array())) {
    SearchResult res = result_from_json(item);
    const json* tags = nullptr;
    if (item.contains("pagemap") && item["pagemap"].contains("metatags") && item["pagemap"]["metatags"].is_array() &&
        !item["pagemap"]["metatags"].empty()) {
      tags = &item["pagemap"]["metatags"][0];
    }
    if (!res.date && tags != nullptr && tags->contains("article:published_time")) {
      res.date = (*tags)["article:published_time"].get<std::string>();
    }
    out.push_back(std::move(res));
  }
  return out;
}

StubSearchClient::StubSearchClient(const std::filesystem::path& fixture_dir) {
  std::ifstream in(fixture_dir / "search.json");
  if (!in) return;
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return;
  for (const auto& r : j.value("results", json::array())) results_.push_back(result_from_json(r));
  for (const auto& f : j.value("fail_first", json::array())) fail_first_.push_back(f.get<std::string>());
}

StubSearchClient::StubSearchClient(std::vector<SearchResult> results, std::vector<std::string> fail_first)
    : results_(std::move(results)), fail_first_(std::move(fail_first)) {}

std::vector<SearchResult> StubSearchClient::search(const SearchQuery&, int k) {
  const int call = calls_++;
  std::lock_guard lock(mu_);
  if (static_cast<std::size_t>(call) < fail_first_.size()) {
    const std::string& kind = fail_first_[static_cast<std::size_t>(call)];
    if (kind == "quota") throw Error(Errc::QuotaExceeded, "stub: quota");
    if (kind == "rate_limit") throw Error(Errc::RateLimited, "stub: rate limited");
    if (kind == "auth") throw Error(Errc::AuthError, "stub: credentials rejected");
    throw Error(Errc::TransportError, "stub: transport failure");
  }
  std::vector<SearchResult> out = results_;
  if (out.size() > static_cast<std::size_t>(std::max(k, 0))) out.resize(static_cast<std::size_t>(std::max(k, 0)));
  return out;
}

std::vector<SearchResult> promote_exact_matches(std::vector<SearchResult> results,
                                                const std::optional<std::string>& phrase) {
  for (auto& r : results) {
    r.exact_match = phrase && !phrase->empty() && (contains(r.title, *phrase) || contains(r.snippet, *phrase));
  }
  std::stable_partition(results.begin(), results.end(), [](const SearchResult& r) { return r.exact_match; });
  for (std::size_t i = 0; i < results.size(); ++i) results[i].rank = static_cast<int>(i) + 1;
  return results;
}

SearchOutcome search(const SearchQuery& query, int k, SearchClient& client, const RetryPolicy& policy,
                     const Sleeper& sleep) {
  SearchOutcome outcome;
  try {
    auto results = with_retries(
        policy, {Errc::QuotaExceeded, Errc::RateLimited, Errc::TransportError}, sleep,
        [&] { return client.search(query, k); }, &outcome.attempts);
    if (results.size() > static_cast<std::size_t>(std::max(k, 0))) results.resize(static_cast<std::size_t>(k));
    outcome.results = promote_exact_matches(std::move(results), query.exact_phrase);
  } catch (const Error& e) {
    outcome.error = e.what();
  }
  return outcome;
}

std::string decode_html_entities(std::string_view text) {
  static const std::map<std::string, unsigned long, std::less<>> kNamed = {
      {"amp", '&'},     {"lt", '<'},       {"gt", '>'},       {"quot", '"'},     {"apos", '\''},
      {"nbsp", ' '},    {"mdash", 0x2014}, {"ndash", 0x2013}, {"hellip", 0x2026}, {"lsquo", 0x2018},
      {"rsquo", 0x2019}, {"ldquo", 0x201C}, {"rdquo", 0x201D}, {"laquo", 0xAB},   {"raquo", 0xBB},
      {"copy", 0xA9}};
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    const std::size_t semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += '&';
      continue;
    }
    const std::string_view name = text.substr(i + 1, semi - i - 1);
    unsigned long cp = 0;
    bool ok = false;
    if (!name.empty() && name[0] == '#') {
      const bool hex = name.size() > 1 && (name[1] == 'x' || name[1] == 'X');
      const std::string digits(name.substr(hex ? 2 : 1));
      if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [&](unsigned char c) {
            return hex ? std::isxdigit(c) != 0 : std::isdigit(c) != 0;
          })) {
        cp = std::stoul(digits, nullptr, hex ? 16 : 10);
        ok = cp > 0 && cp < 0x110000;
      }
    } else if (const auto it = kNamed.find(name); it != kNamed.end()) {
      cp = it->second;
      ok = true;
    }
    if (!ok) {
      out += '&';
      continue;
    }
    append_utf8(out, cp);
    i = semi;
  }
  return out;
}

std::string html_title(std::string_view html) {
  const std::size_t open = ifind(html, "<title", 0);
  if (open == std::string_view::npos) return {};
  const std::size_t gt = html.find('>', open);
  if (gt == std::string_view::npos) return {};
  const std::size_t close = ifind(html, "</title", gt);
  if (close == std::string_view::npos) return {};
  return collapse_whitespace(decode_html_entities(html.substr(gt + 1, close - gt - 1)));
}

std::string html_to_text(std::string_view html) {
  struct Block {
    std::string raw;
    std::size_t chars = 0;
    std::size_t link_chars = 0;
  };
  std::vector<std::string> kept;
  Block block;
  int anchor_depth = 0;
  int boiler_depth = 0;

  auto flush = [&] {
    if (block.chars > 0 && block.link_chars * 2 < block.chars) {
      std::string text = collapse_whitespace(decode_html_entities(block.raw));
      if (!text.empty()) kept.push_back(std::move(text));
    }
    block = Block{};
  };

  std::size_t i = 0;
  while (i < html.size()) {
    if (html[i] != '<') {
      const auto c = static_cast<unsigned char>(html[i]);
      if (boiler_depth == 0) {
        block.raw += html[i];
        if (!std::isspace(c)) {
          ++block.chars;
          if (anchor_depth > 0) ++block.link_chars;
        }
      }
      ++i;
      continue;
    }
    if (html.compare(i, 4, "<!--") == 0) {
      const std::size_t end = html.find("-->", i + 4);
      i = end == std::string_view::npos ? html.size() : end + 3;
      continue;
    }
    std::size_t j = i + 1;
    const bool closing = j < html.size() && html[j] == '/';
    if (closing) ++j;
    const std::size_t name_start = j;
    while (j < html.size() && std::isalnum(static_cast<unsigned char>(html[j]))) ++j;
    const std::string tag = ascii_lower(html.substr(name_start, j - name_start));
    // Find the end of the tag, stepping over quoted attribute values.
    char quote = 0;
    while (j < html.size() && (quote != 0 || html[j] != '>')) {
      if (quote != 0 && html[j] == quote) {
        quote = 0;
      } else if (quote == 0 && (html[j] == '"' || html[j] == '\'')) {
        quote = html[j];
      }
      ++j;
    }
    const bool self_closing = j > 0 && j < html.size() && html[j - 1] == '/';
    i = j < html.size() ? j + 1 : html.size();
    if (tag.empty()) {
      if (boiler_depth == 0 && !closing && name_start < html.size() && html[name_start] != '!' &&
          html[name_start] != '?') {
        block.raw += '<';  // a literal '<' in text
        i = name_start;
      }
      continue;
    }

    if (!closing && is_skipped_tag(tag)) {
      const std::size_t end = ifind(html, "</" + tag, i);
      if (end == std::string_view::npos) {
        i = html.size();
      } else {
        const std::size_t gt = html.find('>', end);
        i = gt == std::string_view::npos ? html.size() : gt + 1;
      }
      continue;
    }
    if (is_boilerplate_tag(tag)) {
      flush();
      if (self_closing) continue;
      boiler_depth = closing ? std::max(0, boiler_depth - 1) : boiler_depth + 1;
      continue;
    }
    if (tag == "a") {
      if (!self_closing) anchor_depth = closing ? std::max(0, anchor_depth - 1) : anchor_depth + 1;
      continue;
    }
    if (is_block_tag(tag)) {
      flush();
    } else {
      block.raw += ' ';
    }
  }
  flush();

  std::string out;
  for (const auto& t : kept) {
    if (!out.empty()) out += '\n';
    out += t;
  }
  return out;
}

std::string truncation_note(std::size_t max_bytes) {
  return "[truncated: page exceeded " + std::to_string(max_bytes) + " bytes]";
}

HttpPageFetcher::HttpPageFetcher(std::shared_ptr<HttpTransport> transport, std::chrono::milliseconds timeout,
                                 std::size_t max_bytes)
    : transport_(std::move(transport)), timeout_(timeout), max_bytes_(max_bytes) {}

FetchedPage HttpPageFetcher::fetch(const std::string& link) {
  if (url_host(link).empty()) throw Error(Errc::InvalidArgument, "not an http(s) URL: " + link);
  HttpRequest req;
  req.url = link;
  req.timeout = timeout_;
  req.max_bytes = max_bytes_;
  req.headers = {{"Accept", "text/html,application/xhtml+xml,text/plain;q=0.9"}};
  const HttpResponse r = transport_->send(req);
  throw_for_status(r.status, "fetch", {});
  return page_from_body(r.body, r.content_type, r.truncated);
}

StubPageFetcher::StubPageFetcher(const std::filesystem::path& fixture_dir, std::size_t max_bytes)
    : dir_(fixture_dir), max_bytes_(max_bytes) {
  std::ifstream in(fixture_dir / "pages.json");
  if (in) index_ = json::parse(in, nullptr, false);
  if (index_.is_discarded() || !index_.is_object()) index_ = json::object();
}

FetchedPage StubPageFetcher::fetch(const std::string& link) {
  ++calls_;
  const auto it = index_.find(link);
  if (it == index_.end() || !it->is_string()) throw Error(Errc::TransportError, "stub: unreachable " + link);
  std::ifstream in(dir_ / "pages" / it->get<std::string>(), std::ios::binary);
  if (!in) throw Error(Errc::TransportError, "stub: missing page file for " + link);
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  bool truncated = false;
  if (max_bytes_ > 0 && body.size() > max_bytes_) {
    body.resize(max_bytes_);
    truncated = true;
  }
  return page_from_body(body, "text/html", truncated);
}

SourceDocument fetch_content(const SearchResult& result, PageFetcher& fetcher, std::size_t max_bytes) {
  SourceDocument doc;
  doc.link = result.link;
  doc.title = result.title;
  doc.date = result.date.value_or(std::string(kDateNotAvailable));
  if (doc.date.empty()) doc.date = std::string(kDateNotAvailable);
  doc.rank = result.rank;
  doc.exact_match = result.exact_match;
  doc.content = std::string(kFetchFailedMarker);
  try {
    FetchedPage page = fetcher.fetch(result.link);
    if (doc.title.empty()) doc.title = page.title;
    if (!page.text.empty()) {
      doc.content = std::move(page.text);
      if (page.truncated) doc.content += "\n" + truncation_note(max_bytes);
    }
  } catch (...) {
    doc.content = std::string(kFetchFailedMarker);
  }
  return doc;
}

EvidenceBuffer build_evidence_buffer(const std::string& case_id, std::span<const SearchResult> results,
                                     PageFetcher& fetcher, const FetchOptions& options, const Sleeper& sleep) {
  EvidenceBuffer buffer;
  buffer.case_id = case_id;
  buffer.documents.resize(results.size());

  using Clock = std::chrono::steady_clock;
  std::mutex mu;
  std::map<std::string, Clock::time_point> next_slot;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= results.size()) return;
      Clock::duration wait{0};
      {
        std::lock_guard lock(mu);
        const std::string host = url_host(results[i].link);
        const auto now = Clock::now();
        auto& slot = next_slot[host];
        const auto start = std::max(now, slot);
        slot = start + options.politeness_delay;
        wait = start - now;
      }
      if (wait > Clock::duration::zero() && sleep) {
        sleep(std::chrono::ceil<std::chrono::milliseconds>(wait));
      }
      buffer.documents[i] = fetch_content(results[i], fetcher, options.max_bytes);
    }
  };
  const std::size_t n_workers =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::max(1, options.max_in_flight)), 1,
                              std::max<std::size_t>(1, results.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::stable_sort(buffer.documents.begin(), buffer.documents.end(),
                   [](const SourceDocument& a, const SourceDocument& b) { return a.rank < b.rank; });
  buffer.fetched_at = utc_timestamp_now();
  return buffer;
}

void write_evidence(const std::filesystem::path& dir, const EvidenceBuffer& buffer,
                    const std::vector<std::string>& notes) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  json docs = buffer.documents;
  json meta = {{"case_id", buffer.case_id},
               {"fetched_at", buffer.fetched_at},
               {"stopwords_version", std::string(kStopwordsVersion)},
               {"notes", notes}};
  for (const auto& [name, value] : {std::pair{"evidence.json", &docs}, std::pair{"evidence.meta.json", &meta}}) {
    std::ofstream out(dir / name);
    out << dump_json(*value);
    if (!out) throw Error(Errc::PersistFailure, "cannot write " + (dir / name).string());
  }
}

std::optional<StoredEvidence> read_evidence(const std::filesystem::path& dir) {
  std::ifstream docs_in(dir / "evidence.json");
  std::ifstream meta_in(dir / "evidence.meta.json");
  if (!docs_in || !meta_in) return std::nullopt;
  const json docs = json::parse(docs_in, nullptr, false);
  const json meta = json::parse(meta_in, nullptr, false);
  if (docs.is_discarded() || !docs.is_array() || meta.is_discarded() || !meta.is_object()) return std::nullopt;
  StoredEvidence s;
  try {
    s.buffer.documents = docs.get<std::vector<SourceDocument>>();
    s.buffer.case_id = meta.value("case_id", std::string{});
    s.buffer.fetched_at = meta.value("fetched_at", std::string{});
    s.notes = meta.value("notes", std::vector<std::string>{});
  } catch (const json::exception&) {
    return std::nullopt;
  }
  return s;
}

RetrievalOutcome gather_evidence(const Case& c, const std::filesystem::path& case_dir, SearchClient& search_client,
                                 PageFetcher& fetcher, const RetrievalOptions& options, const Sleeper& sleep) {
  if (!options.refresh) {
    if (auto stored = read_evidence(case_dir)) {
      return {std::move(stored->buffer), std::move(stored->notes), true};
    }
  }
  RetrievalOutcome outcome;
  std::vector<SearchResult> to_fetch;
  if (!c.metadata.media_link.empty()) {
    SearchResult source;
    source.link = c.metadata.media_link;
    source.rank = 0;
    to_fetch.push_back(std::move(source));
  }

  std::size_t found = 0;
  try {
    const SearchQuery query = extract_keywords(c.metadata.title, c.metadata.description);
    SearchOutcome s = search(query, options.k, search_client, options.retry, sleep);
    if (!s.error.empty()) {
      outcome.notes.push_back("search failed after " + std::to_string(s.attempts) + " attempt(s): " + s.error);
    }
    found = s.results.size();
    for (auto& r : s.results) to_fetch.push_back(std::move(r));
  } catch (const Error& e) {
    if (e.code() != Errc::NoKeywords) throw;
    outcome.notes.push_back("retrieval skipped: no keywords in title or description");
  }
  if (found == 0) outcome.notes.push_back("no external sources");

  outcome.buffer = build_evidence_buffer(c.case_id, to_fetch, fetcher, options.fetch, sleep);
  return outcome;
}

RetrievalOutcome retrieve_evidence(const Case& c, const std::filesystem::path& case_dir, SearchClient& search_client,
                                   PageFetcher& fetcher, const RetrievalOptions& options, const Sleeper& sleep) {
  RetrievalOutcome outcome = gather_evidence(c, case_dir, search_client, fetcher, options, sleep);
  if (!outcome.from_cache) write_evidence(case_dir, outcome.buffer, outcome.notes);
  return outcome;
}

std::string utc_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace mmv
