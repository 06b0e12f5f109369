#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mmv/error.hpp"
#include "mmv/verification.hpp"
#include "published_prompts.hpp"
#include "synth_media.hpp"

using namespace mmv;

namespace {

const std::filesystem::path kId115Stubs = std::filesystem::path(MMV_FIXTURE_DIR) / "ID115" / "stubs";

// Days since 1970-01-01 for a proleptic Gregorian date.
long long days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const long long era = (y >= 0 ? y : y - 399) / 400;
  const long long yoe = y - era * 400;
  const long long doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const long long doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + doe - 719468;
}

CalendarDate ymd(int y, unsigned m, unsigned d) {
  return std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
}

std::optional<Errc> code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

json id115_crossval_json() {
  const json fx = json::parse(testing::read_file(kId115Stubs / "llm.json"));
  return parse_llm_json(fx["by_purpose"]["cross_validation"][0]["text"].get<std::string>(), TemplateId::cross_validation);
}

json llm_fixture(const std::vector<std::string>& texts, const std::string& purpose) {
  json list = json::array();
  for (const auto& t : texts) list.push_back({{"text", t}});
  json fx;
  fx["by_purpose"][purpose] = list;
  return fx;
}

const std::string kForensicReply =
    R"({"metadata-validation": {"location": "l", "event": "e", "people": "p"}, "authenticity": "The content appears authentic",
        "auth-evidence": "lighting", "synt-type": "none", "other": ""})";

std::vector<ForensicImage> two_images() { return {{"kf_0.jpg (video1.mp4 @ 0.00 s)", "QUJD"}, {"kf_1.jpg", "REVG"}}; }

}  // namespace

TEST_CASE("bundled templates match the files and the published prompt bodies") {
  for (TemplateId id : {TemplateId::cross_validation, TemplateId::forensic}) {
    const std::string file = testing::read_file(std::filesystem::path(MMV_TEMPLATE_DIR) / template_file_name(id));
    CHECK(template_body(id) == file);
  }
  const std::string_view p1 = template_body(TemplateId::cross_validation);
  const std::string_view p2 = template_body(TemplateId::forensic);
  CHECK(p1.substr(0, testing::kPublishedPrompt1.size()) == testing::kPublishedPrompt1);
  CHECK(p2.substr(0, testing::kPublishedPrompt2.size()) == testing::kPublishedPrompt2);
  CHECK(p1.substr(testing::kPublishedPrompt1.size()) == "\n### Sources:\n{{sources}}\n");
  CHECK(p2.substr(testing::kPublishedPrompt2.size()) == "\n### Metadata:\n{{metadata}}\n\n### Images:\n{{images}}\n");
}

TEST_CASE("rendering prompts") {
  const std::vector<SourceDocument> docs = {{"https://a.example/1", "Not available", "A", "a", 1, true},
                                            {"https://b.example/2", "May 28, 2022", "B", "b", 2, false},
                                            {"https://c.example/3", "Not available", "C", "Failed to fetch the page.", 3, false}};
  const std::string p1 = render_prompt(TemplateId::cross_validation, {{"sources", dump_json(json(docs))}});
  for (const auto& d : docs) CHECK_THAT(p1, Catch::Matchers::ContainsSubstring(d.link));
  CHECK_THAT(p1, Catch::Matchers::ContainsSubstring("If the time frame is less than 1 month"));
  CHECK_THAT(p1, !Catch::Matchers::ContainsSubstring("{{"));
  CHECK(p1 == render_prompt(TemplateId::cross_validation, {{"sources", dump_json(json(docs))}}));

  const std::string p2 = render_prompt(TemplateId::forensic, {{"images", "Image 1\nImage 2\n"}, {"metadata", "{}"}});
  CHECK_THAT(p2, Catch::Matchers::ContainsSubstring("Check if the content is synthetic"));

  CHECK(code_of([] { render_prompt(TemplateId::cross_validation, {}); }) == Errc::MissingBinding);
  CHECK(code_of([] { render_prompt(TemplateId::forensic, {{"metadata", "{}"}}); }) == Errc::MissingBinding);
  CHECK(render_template("{{a}}{{a}}-{{b}}", {{"a", "x"}, {"b", "{{a}}"}}) == "xx-{{a}}");
}

TEST_CASE("parsing model replies against the schemas") {
  const json cv = id115_crossval_json();
  CHECK(cv["location"]["coordinates"] == "48.9781\xC2\xB0 N, 37.8017\xC2\xB0 E");

  const std::string fenced = "```json\n{\"location\": \"x\", \"date\": \"01/01/2020\", \"about\": \"a\", \"tag\": []}\n```";
  CHECK(parse_llm_json(fenced, TemplateId::cross_validation)["location"] == "x");
  const std::string wrapped = "Here you go: {\"location\": 1, \"date\": 2, \"about\": 3, \"tag\": 4} Hope it helps.";
  CHECK(parse_llm_json(wrapped, TemplateId::cross_validation)["tag"] == 4);

  try {
    parse_llm_json(R"({"location": 1, "date": 2, "about": 3})", TemplateId::cross_validation);
    FAIL("expected SchemaViolation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaViolation);
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("\"tag\""));
  }
  CHECK(missing_keys(json::parse(kForensicReply), TemplateId::forensic).empty());
  json no_synt = json::parse(kForensicReply);
  no_synt.erase("synt-type");
  CHECK(missing_keys(no_synt, TemplateId::forensic) == std::vector<std::string>{"synt-type"});
  CHECK(code_of([] { parse_llm_json("plain prose", TemplateId::forensic); }) == Errc::NoJsonFound);
}

TEST_CASE("parse_llm_json never throws anything but its own errors") {
  std::mt19937 rng(17);
  for (int t = 0; t < 3000; ++t) {
    std::string bytes;
    for (std::size_t i = rng() % 64; i > 0; --i) bytes.push_back(static_cast<char>(rng() % 256));
    if (t % 3 == 0) bytes = "{\"location\":" + bytes + "}";
    try {
      parse_llm_json(bytes, t % 2 ? TemplateId::forensic : TemplateId::cross_validation);
    } catch (const Error& e) {
      CHECK((e.code() == Errc::NoJsonFound || e.code() == Errc::SchemaViolation));
    }
  }
}

TEST_CASE("dates") {
  CHECK(parse_date("28/05/2022") == ymd(2022, 5, 28));
  CHECK(parse_date(" 2/3/2021 ") == ymd(2021, 3, 2));
  CHECK(parse_date("29/02/2024") == ymd(2024, 2, 29));
  for (const char* bad : {"31/02/2022", "29/02/2023", "2022-05-28", "28/05/22", "28.05.2022", "", "aa/bb/cccc",
                          "00/01/2022", "01/13/2022", "123/01/2022"}) {
    CHECK(code_of([&] { parse_date(bad); }) == Errc::BadDate);
  }

  const DateSpan span = parse_date_span("28/05/2022 - 02/10/2022");
  CHECK(span.earliest == ymd(2022, 5, 28));
  CHECK(span.latest == ymd(2022, 10, 2));
  CHECK(parse_date_span("02/10/2022 \xE2\x80\x93 28/05/2022") == span);
  CHECK(parse_date_span("28/05/2022").days() == 0);
  CHECK(format_date(ymd(2022, 5, 8)) == "08/05/2022");

  std::mt19937 rng(3);
  for (int t = 0; t < 500; ++t) {
    const int y1 = 1990 + static_cast<int>(rng() % 40);
    const unsigned m1 = 1 + rng() % 12;
    const unsigned d1 = 1 + rng() % 28;
    const int y2 = 1990 + static_cast<int>(rng() % 40);
    const unsigned m2 = 1 + rng() % 12;
    const unsigned d2 = 1 + rng() % 28;
    const DateSpan s = parse_date_span(format_date(ymd(y1, m1, d1)) + " - " + format_date(ymd(y2, m2, d2)));
    const long long expected = std::llabs(days_from_civil(y2, static_cast<int>(m2), static_cast<int>(d2)) -
                                          days_from_civil(y1, static_cast<int>(m1), static_cast<int>(d1)));
    CHECK(s.days() == expected);
    CHECK(std::chrono::sys_days{s.earliest} <= std::chrono::sys_days{s.latest});
  }
}

TEST_CASE("consensus classification partitions day counts") {
  CHECK(classify_consensus_days(0) == ConsensusLabel::Consensus);
  CHECK(classify_consensus_days(29) == ConsensusLabel::Consensus);
  CHECK(classify_consensus_days(30) == ConsensusLabel::Partial);
  CHECK(classify_consensus_days(92) == ConsensusLabel::Partial);
  CHECK(classify_consensus_days(93) == ConsensusLabel::NonVerifiable);

  const long long id115_days = days_from_civil(2022, 10, 2) - days_from_civil(2022, 5, 28);
  CHECK(id115_days == 127);
  CHECK(classify_consensus(parse_date_span("28/05/2022 - 02/10/2022")) == ConsensusLabel::NonVerifiable);

  int changes = 0;
  ConsensusLabel prev = classify_consensus_days(0);
  for (int d = 1; d <= 5000; ++d) {
    const ConsensusLabel cur = classify_consensus_days(d);
    if (cur != prev) ++changes;
    CHECK(static_cast<int>(cur) >= static_cast<int>(prev));
    prev = cur;
  }
  CHECK(changes == 2);
}

TEST_CASE("coordinates") {
  const GeoPoint lyman = parse_coordinates("48.9781\xC2\xB0 N, 37.8017\xC2\xB0 E");
  CHECK(lyman.lat == 48.9781);
  CHECK(lyman.lon == 37.8017);
  const GeoPoint chile = parse_coordinates("33.5\xC2\xB0 S, 70.6\xC2\xB0 W");
  CHECK(chile.lat == -33.5);
  CHECK(chile.lon == -70.6);
  CHECK(parse_coordinates("-12.5, 130.25") == GeoPoint{-12.5, 130.25});
  CHECK(parse_coordinates("10 n, 20 w") == GeoPoint{10, -20});
  for (const char* bad : {"91\xC2\xB0 N, 0\xC2\xB0 E", "0, 181", "48.9 E, 37.8 N", "48.9", "a, b", "1, 2, 3",
                          "-48 N, 37 E", "48 N, 37", "48 X, 37 E", ""}) {
    CHECK(code_of([&] { parse_coordinates(bad); }) == Errc::BadCoordinates);
  }
}

TEST_CASE("coordinate formatting round-trips") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-90.0, 90.0);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  std::vector<GeoPoint> points = {{0, 0}, {90, 180}, {-90, -180}, {48.9781, 37.8017}, {-0.0, 1e-9}};
  for (int i = 0; i < 1000; ++i) points.push_back({lat(rng), lon(rng)});
  for (const auto& p : points) {
    const GeoPoint back = parse_coordinates(format_coordinates(p));
    CHECK(back.lat == p.lat);
    CHECK(back.lon == p.lon);
  }
  CHECK(format_coordinates({48.9781, 37.8017}) == "48.9781\xC2\xB0 N, 37.8017\xC2\xB0 E");
}

TEST_CASE("ID115 cross-validation reply with deterministic override") {
  std::vector<std::string> notes;
  const CrossValidation cv = cross_validation_from_json(id115_crossval_json(), notes);
  CHECK(cv.location_name == "Lyman (formerly Krasnyi Lyman), Donetsk Oblast, Ukraine");
  REQUIRE(cv.coordinates.has_value());
  CHECK(*cv.coordinates == GeoPoint{48.9781, 37.8017});
  REQUIRE(cv.date_span.has_value());
  CHECK(cv.date_span->days() == 127);
  CHECK(cv.consensus == ConsensusLabel::NonVerifiable);
  REQUIRE(notes.size() == 1);
  CHECK(notes[0] ==
        "consensus label overridden: the model said \"Partial\" but the 127-day span 28/05/2022 - 02/10/2022 "
        "classifies as Non-verifiable");
  CHECK(cv.tags.size() == 6);
  CHECK(cv.tags[0] == "Ukraine War");
  CHECK_THAT(cv.conflicts, Catch::Matchers::ContainsSubstring("liberation"));
  CHECK_THAT(cv.notes, Catch::Matchers::StartsWith("First reported Russian capture"));
}

TEST_CASE("the reported label always follows the date span") {
  std::mt19937 rng(21);
  const std::vector<std::string> claims = {"Yes", "Partial", "Non-verifiable", "Consensus", "no idea", ""};
  for (int t = 0; t < 400; ++t) {
    const CalendarDate a = ymd(2020, 1, 1);
    const auto b = std::chrono::year_month_day{std::chrono::sys_days{a} + std::chrono::days{rng() % 200}};
    const std::string key = rng() % 2 ? "concensus" : "consensus";
    const std::string claim = claims[rng() % claims.size()];
    const json obj = {{"location", "x"},
                      {"date", {{"date", format_date(a) + " - " + format_date(b)}, {key, claim}, {"notes", ""}}},
                      {"about", ""},
                      {"tag", "a, b"}};
    std::vector<std::string> notes;
    const CrossValidation cv = cross_validation_from_json(obj, notes);
    const long long days = std::chrono::sys_days{b}.time_since_epoch().count() -
                           std::chrono::sys_days{a}.time_since_epoch().count();
    const ConsensusLabel expected = days < 30 ? ConsensusLabel::Consensus
                                    : days <= 92 ? ConsensusLabel::Partial
                                                 : ConsensusLabel::NonVerifiable;
    CHECK(cv.consensus == expected);
    const auto claimed = consensus_label_from_string(claim);
    CHECK(notes.size() == (claimed && *claimed != expected ? 1U : 0U));
    CHECK(cv.tags == std::vector<std::string>{"a", "b"});
  }

  std::vector<std::string> notes;
  const json undated = {{"location", "x"}, {"date", {{"date", "sometime in 2022"}, {"concensus", "Partial"}}},
                        {"about", ""}, {"tag", json::array()}};
  const CrossValidation cv = cross_validation_from_json(undated, notes);
  CHECK_FALSE(cv.date_span.has_value());
  CHECK(cv.consensus == ConsensusLabel::Partial);
  REQUIRE(notes.size() == 1);
  CHECK_THAT(notes[0], Catch::Matchers::StartsWith("date not machine-readable"));
}

TEST_CASE("cross-validation run against the stub model") {
  StubLlmClient stub(kId115Stubs);
  EvidenceBuffer buffer{"ID115", {SourceDocument{"https://tass.com/russia/1457247", "May 28, 2022", "T", "C", 1, true}}, ""};
  const VerificationOptions opts{{}, [](auto) {}};
  const auto r = run_cross_validation(buffer, stub, opts);
  REQUIRE(r.value.has_value());
  CHECK_FALSE(r.refusal);
  CHECK(r.llm_calls == 1);
  CHECK(r.value->consensus == ConsensusLabel::NonVerifiable);
  CHECK_THAT(stub.requests().at(0).user, Catch::Matchers::ContainsSubstring("https://tass.com/russia/1457247"));

  StubLlmClient again(kId115Stubs);
  const auto empty = run_cross_validation(EvidenceBuffer{"ID", {}, ""}, again, opts);
  CHECK(empty.value.has_value());
  CHECK(std::find(empty.notes.begin(), empty.notes.end(), "no external sources") != empty.notes.end());
  CHECK_THAT(again.requests().at(0).user, Catch::Matchers::ContainsSubstring("### Sources:\n[]"));

  StubLlmClient sorry(llm_fixture({"I'm sorry, I can't help with that"}, "cross_validation"));
  const auto refused = run_cross_validation(buffer, sorry, opts);
  CHECK(refused.refusal);
  CHECK_FALSE(refused.value.has_value());
  CHECK(sorry.calls() == 1);
}

TEST_CASE("malformed replies get exactly one re-ask") {
  const VerificationOptions opts{{}, [](auto) {}};
  const EvidenceBuffer buffer{"ID", {}, ""};

  StubLlmClient fixed(llm_fixture({R"({"location": "x"})", R"({"location": "x", "date": "", "about": "", "tag": []})"},
                                  "cross_validation"));
  const auto r = run_cross_validation(buffer, fixed, opts);
  CHECK(r.value.has_value());
  CHECK(fixed.calls() == 2);
  const auto reqs = fixed.requests();
  CHECK_THAT(reqs[1].user, Catch::Matchers::EndsWith(std::string(kReaskSuffix)));
  CHECK_THAT(reqs[0].user, !Catch::Matchers::EndsWith(std::string(kReaskSuffix)));

  StubLlmClient hopeless(llm_fixture({"no json", "still no json", "never"}, "cross_validation"));
  const auto failed = run_cross_validation(buffer, hopeless, opts);
  CHECK_FALSE(failed.value.has_value());
  CHECK_FALSE(failed.refusal);
  CHECK(hopeless.calls() == 2);
  CHECK_THAT(failed.failure, Catch::Matchers::ContainsSubstring("after re-ask"));

  json no_synt = json::parse(kForensicReply);
  no_synt.erase("synt-type");
  StubLlmClient forensic(llm_fixture({no_synt.dump(), kForensicReply}, "forensic"));
  const auto images = two_images();
  const auto f = run_forensic_analysis(images, std::nullopt, {}, {}, forensic, opts);
  REQUIRE(f.value.has_value());
  CHECK(forensic.calls() == 2);
  REQUIRE_FALSE(f.notes.empty());
  CHECK_THAT(f.notes[0], Catch::Matchers::ContainsSubstring("synt-type"));
}

TEST_CASE("forensic analysis") {
  const VerificationOptions opts{{}, [](auto) {}};
  StubLlmClient stub(kId115Stubs);
  std::vector<std::string> notes;
  const std::optional<CrossValidation> cv = cross_validation_from_json(id115_crossval_json(), notes);
  CaseMetadata meta;
  meta.title = "Krasny Liman";
  const std::vector<Transcript> transcripts = {
      {"video1.mp4", "auto", {{0, 30, "The games are over", ""}, {30, 45, "", "TransportError"}, {45, 50, "end", ""}}}};
  const auto images = two_images();
  const auto r = run_forensic_analysis(images, cv, meta, transcripts, stub, opts);
  REQUIRE(r.value.has_value());
  CHECK_THAT(r.value->authenticity, Catch::Matchers::ContainsSubstring("appears authentic"));
  CHECK_FALSE(r.value->metadata_validation.people.empty());

  const LlmRequest sent = stub.requests().at(0);
  REQUIRE(sent.images.size() == 2);
  CHECK(sent.images[1].base64 == "REVG");
  CHECK_THAT(sent.user, Catch::Matchers::ContainsSubstring("Image 1: kf_0.jpg (video1.mp4 @ 0.00 s)"));
  CHECK_THAT(sent.user, Catch::Matchers::ContainsSubstring("Lyman (formerly Krasnyi Lyman)"));
  CHECK_THAT(sent.user, Catch::Matchers::ContainsSubstring("The games are over end"));

  const json binding = json::parse(forensic_metadata_binding(std::nullopt, meta, {}));
  CHECK(binding["cross_validation"].is_null());
  CHECK(binding["case_metadata"]["title"] == "Krasny Liman");

  CHECK(code_of([&] { run_forensic_analysis({}, cv, meta, transcripts, stub, opts); }) == Errc::NoImages);

  const json flat = {{"metadata-validation", "only text"}, {"authenticity", nullptr}, {"auth-evidence", 3},
                     {"synt-type", ""}, {"other", json::array()}};
  const ForensicAnalysis fa = forensic_from_json(flat);
  CHECK(fa.metadata_validation.location == "only text");
  CHECK(fa.authenticity.empty());
  CHECK(fa.auth_evidence == "3");
}

TEST_CASE("auth errors propagate and exhausted retries fold into the result") {
  const VerificationOptions opts{{}, [](auto) {}};
  StubLlmClient denied(json{{"default", {{{"error", "auth"}}}}});
  CHECK(code_of([&] { run_cross_validation({}, denied, opts); }) == Errc::AuthError);

  StubLlmClient down(json{{"default", {{{"error", "transport"}}}}});
  const auto r = run_cross_validation({}, down, opts);
  CHECK_FALSE(r.value.has_value());
  CHECK_FALSE(r.refusal);
  CHECK(r.llm_calls == 3);
  CHECK_THAT(r.failure, Catch::Matchers::ContainsSubstring("ExhaustedRetries"));
}
