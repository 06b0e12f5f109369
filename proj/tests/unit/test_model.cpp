#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "mmv/error.hpp"
#include "mmv/model.hpp"

using namespace mmv;
using namespace std::chrono;

namespace {

template <typename T>
T round_trip(const T& value) {
  const json j = value;
  return json::parse(j.dump()).get<T>();
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no mmv::Error thrown");
  return Errc::InvalidArgument;
}

MediaAsset asset(const char* path) {
  MediaAsset a;
  a.path = path;
  return a;
}

CaseMetadata id115_metadata() {
  CaseMetadata m;
  m.location_hint = "Supposedly Liman / Krasny Liman";
  m.violence_level = "(None) Military presence";
  m.media_link = "https://t.me/zvezdanews/82025";
  m.description =
      "During the liberation of Krasny Liman, Russian soldiers found the nationalists' commando post in the "
      "pioneer camp";
  m.category = "Other";
  return m;
}

}  // namespace

TEST_CASE("validate_case normalizes kinds and rejects bad input") {
  const Case c = validate_case("ID115", id115_metadata(),
                               {asset("ID115/video1.mp4"), asset("ID115/video2.MP4")});
  REQUIRE(c.assets.size() == 2);
  CHECK(c.assets[0].kind == MediaKind::video);
  CHECK(c.assets[1].kind == MediaKind::video);
  CHECK(c.assets[0].asset_id == "video1.mp4");

  CHECK(code_of([] { validate_case("x", id115_metadata(), {}); }) == Errc::EmptyCase);
  CHECK(code_of([] { validate_case("x", id115_metadata(), {asset("clip.avi")}); }) ==
        Errc::UnsupportedMedia);
  CHECK(code_of([] { validate_case("x", CaseMetadata{}, {asset("a.mp4")}); }) ==
        Errc::EmptyMetadata);
  CHECK_NOTHROW(validate_case("x", CaseMetadata{}, {asset("a.mp4")}, false));
  CHECK(code_of([] {
          validate_case("x", id115_metadata(), {asset("a/a.mp4"), asset("b/a.mp4")});
        }) == Errc::InvalidCase);

  CaseMetadata description_only;
  description_only.description = "flooded metro station";
  const Case photo = validate_case("p", description_only, {asset("photo.jpg")});
  CHECK(photo.assets[0].kind == MediaKind::image);
}

TEST_CASE("media kinds follow the extension, case-insensitively") {
  CHECK(media_kind_for("a.mp4") == MediaKind::video);
  CHECK(media_kind_for("a.JPG") == MediaKind::image);
  CHECK(media_kind_for("a.jpeg") == MediaKind::image);
  CHECK(media_kind_for("a.png") == MediaKind::image);
  CHECK_FALSE(media_kind_for("a.gif").has_value());
  CHECK_FALSE(media_kind_for("mp4").has_value());
}

TEST_CASE("metadata uses the challenge keys") {
  const json j = id115_metadata();
  CHECK(j.at("location") == "Supposedly Liman / Krasny Liman");
  CHECK(j.at("violence level") == "(None) Military presence");
  CHECK(j.at("media link") == "https://t.me/zvezdanews/82025");
  CHECK(j.at("title") == "");
  CHECK(round_trip(id115_metadata()) == id115_metadata());
}

TEST_CASE("every domain type survives a JSON round trip") {
  const FrameRef ref{"video1.mp4", 45, 1.5};
  CHECK(round_trip(ref) == ref);
  const Shot shot{"video1.mp4", 40, 79};
  CHECK(round_trip(shot) == shot);
  CHECK(shot.length() == 40);
  const Embedding emb{{0.25, -1.0, 1e-300, 3.0}, "classical-v1"};
  CHECK(round_trip(emb) == emb);
  const Keyframe kf{ref, shot, 2, 0.125};
  CHECK(round_trip(kf) == kf);
  const AudioChunk chunk{"video1.mp4", 1, 30.0, 59.0, 480000, 464000};
  CHECK(round_trip(chunk) == chunk);
  const Transcript tr{"video1.mp4", "ru", {{0.0, 30.0, "text", ""}, {30.0, 31.0, "", "TransportError: x"}}};
  CHECK(round_trip(tr) == tr);
  const SourceDocument doc{"https://tass.com/russia/1457247", "May 28, 2022", "Title", "Body", 2, true};
  CHECK(round_trip(doc) == doc);
  const DateSpan span{2022y / May / 28, 2022y / October / 2};
  CHECK(round_trip(span) == span);
  const GeoPoint p{48.9781, 37.8064};
  CHECK(round_trip(p) == p);

  CrossValidation cv;
  cv.location_name = "Lyman";
  cv.coordinates = p;
  cv.date_span = span;
  cv.date_text = "28/05/2022 - 02/10/2022";
  cv.consensus = ConsensusLabel::Partial;
  cv.notes = "n";
  cv.consensus_about = "a";
  cv.conflicts = "c";
  cv.tags = {"Military", "Ukraine"};
  CHECK(round_trip(cv) == cv);
  CrossValidation sparse;
  CHECK(round_trip(sparse) == sparse);

  const ForensicAnalysis fa{{"loc", "event", "people"}, "Authentic", "evidence", "None", "other"};
  CHECK(round_trip(fa) == fa);

  VerificationReport r;
  r.case_id = "ID115";
  r.metadata = id115_metadata();
  r.cross_validation = cv;
  r.forensic = fa;
  r.transcripts = {tr};
  r.sources = {doc};
  r.keyframe_manifest = {kf};
  r.human_review_required = true;
  r.human_review_reason = "reason";
  r.unavailable = {{"forensic", "refused by the model"}};
  r.notes = {"note"};
  CHECK(round_trip(r) == r);

  MediaAsset video = asset("/x/video1.mp4");
  video.asset_id = "video1.mp4";
  video.duration_s = 12.5;
  Case c{"ID115", id115_metadata(), {video}};
  CHECK(round_trip(c) == c);
}

TEST_CASE("random embeddings round-trip bit-exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int t = 0; t < 200; ++t) {
    Embedding e{{}, "x"};
    for (int i = 0; i < 16; ++i) e.vector.push_back(u(rng) / (1 + t));
    CHECK(round_trip(e) == e);
  }
}

TEST_CASE("dates, spans and coordinates") {
  CHECK(parse_iso_date("2022-05-28") == 2022y / May / 28);
  CHECK(format_iso_date(2022y / October / 2) == "2022-10-02");
  CHECK_THROWS_AS(parse_iso_date("2022-13-01"), Error);
  CHECK_THROWS_AS(parse_iso_date("28/05/2022"), Error);
  CHECK(DateSpan{2022y / May / 28, 2022y / October / 2}.days() == 127);
  CHECK(DateSpan{2024y / February / 28, 2024y / March / 1}.days() == 2);

  CHECK(GeoPoint{90.0, -180.0}.valid());
  CHECK_FALSE(GeoPoint{90.5, 0.0}.valid());
  CHECK_FALSE(GeoPoint{0.0, 180.01}.valid());
  CHECK_FALSE(GeoPoint{std::nan(""), 0.0}.valid());
}

TEST_CASE("consensus labels print and parse") {
  CHECK(to_string(ConsensusLabel::Consensus) == "Consensus");
  CHECK(to_string(ConsensusLabel::Partial) == "Partial");
  CHECK(to_string(ConsensusLabel::NonVerifiable) == "Non-verifiable");
  for (auto l : {ConsensusLabel::Consensus, ConsensusLabel::Partial, ConsensusLabel::NonVerifiable}) {
    CHECK(consensus_label_from_string(to_string(l)) == l);
  }
  CHECK_FALSE(consensus_label_from_string("Maybe").has_value());
}

TEST_CASE("fetch failure marker and searchable text") {
  SourceDocument d;
  d.content = std::string(kFetchFailedMarker);
  CHECK(d.fetch_failed());
  CHECK(kFetchFailedMarker == "Failed to fetch the page.");
  CHECK(d.date == "Not available");
  CaseMetadata m;
  CHECK_FALSE(m.has_searchable_text());
  m.title = "t";
  CHECK(m.has_searchable_text());
}

TEST_CASE("dump_json indents by two and ends with a newline") {
  CHECK(dump_json(json{{"a", 1}}) == "{\n  \"a\": 1\n}\n");
  CHECK(dump_json(json("\xff")) == "\"\xef\xbf\xbd\"\n");
}
