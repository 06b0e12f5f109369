#include "mmv/model.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mmv/error.hpp"

namespace mmv {

namespace {

std::string lower_ascii(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string string_or_empty(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

}  // namespace

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::EmptyCase: return "EmptyCase";
    case Errc::UnsupportedMedia: return "UnsupportedMedia";
    case Errc::EmptyMetadata: return "EmptyMetadata";
    case Errc::InvalidCase: return "InvalidCase";
    case Errc::DecodeFailure: return "DecodeFailure";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EncodeFailure: return "EncodeFailure";
    case Errc::NoAudio: return "NoAudio";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::SingleCluster: return "SingleCluster";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::NoKeywords: return "NoKeywords";
    case Errc::QuotaExceeded: return "QuotaExceeded";
    case Errc::PersistFailure: return "PersistFailure";
    case Errc::TransportError: return "TransportError";
    case Errc::RateLimited: return "RateLimited";
    case Errc::AuthError: return "AuthError";
    case Errc::ExhaustedRetries: return "ExhaustedRetries";
    case Errc::OfflineViolation: return "OfflineViolation";
    case Errc::SidecarUnavailable: return "SidecarUnavailable";
    case Errc::HandshakeTimeout: return "HandshakeTimeout";
    case Errc::MissingBinding: return "MissingBinding";
    case Errc::NoJsonFound: return "NoJsonFound";
    case Errc::SchemaViolation: return "SchemaViolation";
    case Errc::BadDate: return "BadDate";
    case Errc::BadCoordinates: return "BadCoordinates";
    case Errc::NoImages: return "NoImages";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

bool CaseMetadata::has_searchable_text() const { return !title.empty() || !description.empty(); }

std::string_view to_string(MediaKind kind) { return kind == MediaKind::video ? "video" : "image"; }

int DateSpan::days() const {
  using std::chrono::sys_days;
  return static_cast<int>((sys_days{latest} - sys_days{earliest}).count());
}

std::string format_iso_date(const CalendarDate& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

CalendarDate parse_iso_date(std::string_view text) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(Errc::BadDate, "expected yyyy-mm-dd, got '" + std::string(text) + "'");
  }
  auto num = [&](std::size_t pos, std::size_t len, auto& out) {
    auto [p, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, out);
    if (ec != std::errc{} || p != text.data() + pos + len) {
      throw Error(Errc::BadDate, "expected yyyy-mm-dd, got '" + std::string(text) + "'");
    }
  };
  num(0, 4, y);
  num(5, 2, m);
  num(8, 2, d);
  CalendarDate date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!date.ok()) throw Error(Errc::BadDate, "not a calendar date: " + std::string(text));
  return date;
}

std::string_view to_string(ConsensusLabel label) {
  switch (label) {
    case ConsensusLabel::Consensus: return "Consensus";
    case ConsensusLabel::Partial: return "Partial";
    case ConsensusLabel::NonVerifiable: return "Non-verifiable";
  }
  return "Non-verifiable";
}

std::optional<ConsensusLabel> consensus_label_from_string(std::string_view text) {
  std::string s = lower_ascii(std::string(text));
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == ' ' || c == '-' || c == '_'; }),
          s.end());
  if (s == "consensus" || s == "yes") return ConsensusLabel::Consensus;
  if (s == "partial") return ConsensusLabel::Partial;
  if (s == "nonverifiable" || s == "no" || s == "notverifiable") return ConsensusLabel::NonVerifiable;
  return std::nullopt;
}

bool GeoPoint::valid() const {
  return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
         lon <= 180.0;
}

std::optional<MediaKind> media_kind_for(const std::filesystem::path& path) {
  const std::string ext = lower_ascii(path.extension().string());
  if (ext == ".mp4") return MediaKind::video;
  if (ext == ".jpg" || ext == ".jpeg" || ext == ".png") return MediaKind::image;
  return std::nullopt;
}

Case validate_case(std::string case_id, CaseMetadata metadata, std::vector<MediaAsset> assets,
                   bool require_searchable_metadata) {
  if (assets.empty()) throw Error(Errc::EmptyCase, "case '" + case_id + "' has no media assets");
  for (auto& asset : assets) {
    auto kind = media_kind_for(asset.path);
    if (!kind) {
      throw Error(Errc::UnsupportedMedia,
                  "unsupported media file '" + asset.path.filename().string() + "'");
    }
    asset.kind = *kind;
    if (asset.asset_id.empty()) asset.asset_id = asset.path.filename().string();
    if (asset.kind == MediaKind::image) {
      asset.duration_s.reset();
    } else if (asset.duration_s && !(*asset.duration_s > 0.0)) {
      throw Error(Errc::InvalidCase, "video '" + asset.asset_id + "' has non-positive duration");
    }
  }
  std::vector<std::string> ids;
  for (const auto& a : assets) ids.push_back(a.asset_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(Errc::InvalidCase, "duplicate asset ids in case '" + case_id + "'");
  }
  if (require_searchable_metadata && !metadata.has_searchable_text()) {
    throw Error(Errc::EmptyMetadata, "title and description are both empty; retrieval cannot run");
  }
  return Case{std::move(case_id), std::move(metadata), std::move(assets)};
}

CaseMetadata read_case_metadata(const std::filesystem::path& metadata_json) {
  std::ifstream in(metadata_json);
  if (!in) throw Error(Errc::InvalidCase, "cannot open " + metadata_json.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::InvalidCase, metadata_json.string() + " is not a JSON object");
  }
  return j.get<CaseMetadata>();
}

std::string dump_json(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

// ---- JSON -----------------------------------------------------------------

void to_json(json& j, const CaseMetadata& v) {
  j = json{{"location", v.location_hint}, {"violence level", v.violence_level},
           {"title", v.title},            {"media link", v.media_link},
           {"description", v.description}, {"category", v.category}};
}

void from_json(const json& j, CaseMetadata& v) {
  v.location_hint = string_or_empty(j, "location");
  v.violence_level = string_or_empty(j, "violence level");
  v.title = string_or_empty(j, "title");
  v.media_link = string_or_empty(j, "media link");
  v.description = string_or_empty(j, "description");
  v.category = string_or_empty(j, "category");
}

void to_json(json& j, const MediaAsset& v) {
  j = json{{"asset_id", v.asset_id}, {"kind", to_string(v.kind)}, {"path", v.path.generic_string()}};
  if (v.duration_s) j["duration_s"] = *v.duration_s;
}

void from_json(const json& j, MediaAsset& v) {
  v.asset_id = j.at("asset_id").get<std::string>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "video") {
    v.kind = MediaKind::video;
  } else if (kind == "image") {
    v.kind = MediaKind::image;
  } else {
    throw Error(Errc::UnsupportedMedia, "unknown media kind '" + kind + "'");
  }
  v.path = j.at("path").get<std::string>();
  v.duration_s.reset();
  if (j.contains("duration_s") && !j["duration_s"].is_null()) v.duration_s = j["duration_s"].get<double>();
}

void to_json(json& j, const Case& v) {
  j = json{{"case_id", v.case_id}, {"metadata", v.metadata}, {"assets", v.assets}};
}

void from_json(const json& j, Case& v) {
  v.case_id = j.at("case_id").get<std::string>();
  v.metadata = j.at("metadata").get<CaseMetadata>();
  v.assets = j.at("assets").get<std::vector<MediaAsset>>();
}

void to_json(json& j, const FrameRef& v) {
  j = json{{"asset_id", v.asset_id}, {"frame_index", v.frame_index}, {"timestamp_s", v.timestamp_s}};
}

void from_json(const json& j, FrameRef& v) {
  v.asset_id = j.at("asset_id").get<std::string>();
  v.frame_index = j.at("frame_index").get<std::int64_t>();
  v.timestamp_s = j.at("timestamp_s").get<double>();
}

void to_json(json& j, const Shot& v) {
  j = json{{"asset_id", v.asset_id}, {"start_frame", v.start_frame}, {"end_frame", v.end_frame}};
}

void from_json(const json& j, Shot& v) {
  v.asset_id = j.at("asset_id").get<std::string>();
  v.start_frame = j.at("start_frame").get<std::int64_t>();
  v.end_frame = j.at("end_frame").get<std::int64_t>();
}

void to_json(json& j, const Embedding& v) {
  j = json{{"vector", v.vector}, {"dim", v.dim()}, {"extractor_id", v.extractor_id}};
}

void from_json(const json& j, Embedding& v) {
  v.vector = j.at("vector").get<std::vector<double>>();
  v.extractor_id = j.at("extractor_id").get<std::string>();
  if (j.contains("dim") && j["dim"].get<std::size_t>() != v.vector.size()) {
    throw Error(Errc::DimMismatch, "embedding dim field disagrees with vector length");
  }
}

// Flat shape: this is also the keyframes.json manifest entry.
void to_json(json& j, const Keyframe& v) {
  j = json{{"asset_id", v.frame.asset_id},
           {"frame_index", v.frame.frame_index},
           {"timestamp_s", v.frame.timestamp_s},
           {"cluster_id", v.cluster_id},
           {"distance_to_centroid", v.distance_to_centroid},
           {"shot", {{"start_frame", v.shot.start_frame}, {"end_frame", v.shot.end_frame}}}};
}

void from_json(const json& j, Keyframe& v) {
  v.frame.asset_id = j.at("asset_id").get<std::string>();
  v.frame.frame_index = j.at("frame_index").get<std::int64_t>();
  v.frame.timestamp_s = j.at("timestamp_s").get<double>();
  v.cluster_id = j.at("cluster_id").get<int>();
  v.distance_to_centroid = j.at("distance_to_centroid").get<double>();
  v.shot.asset_id = v.frame.asset_id;
  if (j.contains("shot")) {
    v.shot.start_frame = j["shot"].at("start_frame").get<std::int64_t>();
    v.shot.end_frame = j["shot"].at("end_frame").get<std::int64_t>();
  } else {
    v.shot.start_frame = v.shot.end_frame = v.frame.frame_index;
  }
}

void to_json(json& j, const AudioChunk& v) {
  j = json{{"asset_id", v.asset_id},           {"index", v.index},
           {"start_s", v.start_s},             {"end_s", v.end_s},
           {"sample_offset", v.sample_offset}, {"sample_count", v.sample_count}};
}

void from_json(const json& j, AudioChunk& v) {
  v.asset_id = j.at("asset_id").get<std::string>();
  v.index = j.at("index").get<int>();
  v.start_s = j.at("start_s").get<double>();
  v.end_s = j.at("end_s").get<double>();
  v.sample_offset = j.at("sample_offset").get<std::int64_t>();
  v.sample_count = j.at("sample_count").get<std::int64_t>();
}

void to_json(json& j, const TranscriptSegment& v) {
  j = json{{"start_s", v.start_s}, {"end_s", v.end_s}, {"text", v.text}};
  if (!v.error.empty()) j["error"] = v.error;
}

void from_json(const json& j, TranscriptSegment& v) {
  v.start_s = j.at("start_s").get<double>();
  v.end_s = j.at("end_s").get<double>();
  v.text = j.at("text").get<std::string>();
  v.error = string_or_empty(j, "error");
}

void to_json(json& j, const Transcript& v) {
  j = json{{"asset_id", v.asset_id}, {"language", v.language}, {"segments", v.segments}};
}

void from_json(const json& j, Transcript& v) {
  v.asset_id = j.at("asset_id").get<std::string>();
  v.language = j.at("language").get<std::string>();
  v.segments = j.at("segments").get<std::vector<TranscriptSegment>>();
}

void to_json(json& j, const SourceDocument& v) {
  j = json{{"link", v.link},       {"date", v.date}, {"title", v.title}, {"content", v.content},
           {"rank", v.rank}, {"exact_match", v.exact_match}};
}

void from_json(const json& j, SourceDocument& v) {
  v.link = j.at("link").get<std::string>();
  v.date = j.contains("date") ? string_or_empty(j, "date") : std::string(kDateNotAvailable);
  v.title = string_or_empty(j, "title");
  v.content = string_or_empty(j, "content");
  v.rank = j.value("rank", 1);
  v.exact_match = j.value("exact_match", false);
}

void to_json(json& j, const DateSpan& v) {
  j = json{{"earliest", format_iso_date(v.earliest)}, {"latest", format_iso_date(v.latest)}};
}

void from_json(const json& j, DateSpan& v) {
  v.earliest = parse_iso_date(j.at("earliest").get<std::string>());
  v.latest = parse_iso_date(j.at("latest").get<std::string>());
  if (std::chrono::sys_days{v.latest} < std::chrono::sys_days{v.earliest}) {
    throw Error(Errc::BadDate, "date span with latest before earliest");
  }
}

void to_json(json& j, const GeoPoint& v) { j = json{{"lat", v.lat}, {"lon", v.lon}}; }

void from_json(const json& j, GeoPoint& v) {
  v.lat = j.at("lat").get<double>();
  v.lon = j.at("lon").get<double>();
  if (!v.valid()) throw Error(Errc::BadCoordinates, "coordinates out of range");
}

void to_json(json& j, const CrossValidation& v) {
  j = json{{"location_name", v.location_name},
           {"coordinates", v.coordinates ? json(*v.coordinates) : json(nullptr)},
           {"date_span", v.date_span ? json(*v.date_span) : json(nullptr)},
           {"date_text", v.date_text},
           {"consensus", to_string(v.consensus)},
           {"notes", v.notes},
           {"consensus_about", v.consensus_about},
           {"conflicts", v.conflicts},
           {"tags", v.tags}};
}

void from_json(const json& j, CrossValidation& v) {
  v.location_name = string_or_empty(j, "location_name");
  v.coordinates.reset();
  v.date_span.reset();
  if (j.contains("coordinates") && !j["coordinates"].is_null()) v.coordinates = j["coordinates"].get<GeoPoint>();
  if (j.contains("date_span") && !j["date_span"].is_null()) v.date_span = j["date_span"].get<DateSpan>();
  v.date_text = string_or_empty(j, "date_text");
  auto label = consensus_label_from_string(j.at("consensus").get<std::string>());
  if (!label) throw Error(Errc::SchemaViolation, "unknown consensus label");
  v.consensus = *label;
  v.notes = string_or_empty(j, "notes");
  v.consensus_about = string_or_empty(j, "consensus_about");
  v.conflicts = string_or_empty(j, "conflicts");
  v.tags = j.value("tags", std::vector<std::string>{});
}

void to_json(json& j, const MetadataValidation& v) {
  j = json{{"location", v.location}, {"event", v.event}, {"people", v.people}};
}

void from_json(const json& j, MetadataValidation& v) {
  v.location = string_or_empty(j, "location");
  v.event = string_or_empty(j, "event");
  v.people = string_or_empty(j, "people");
}

// Same hyphenated keys the forensic prompt asks for.
void to_json(json& j, const ForensicAnalysis& v) {
  j = json{{"metadata-validation", v.metadata_validation},
           {"authenticity", v.authenticity},
           {"auth-evidence", v.auth_evidence},
           {"synt-type", v.synt_type},
           {"other", v.other}};
}

void from_json(const json& j, ForensicAnalysis& v) {
  v.metadata_validation = j.at("metadata-validation").get<MetadataValidation>();
  v.authenticity = string_or_empty(j, "authenticity");
  v.auth_evidence = string_or_empty(j, "auth-evidence");
  v.synt_type = string_or_empty(j, "synt-type");
  v.other = string_or_empty(j, "other");
}

void to_json(json& j, const VerificationReport& v) {
  json unavailable = json::object();
  for (const auto& [section, reason] : v.unavailable) unavailable[section] = reason;
  j = json{{"case_id", v.case_id},
           {"metadata", v.metadata},
           {"cross_validation", v.cross_validation ? json(*v.cross_validation) : json(nullptr)},
           {"forensic", v.forensic ? json(*v.forensic) : json(nullptr)},
           {"transcripts", v.transcripts},
           {"sources", v.sources},
           {"keyframe_manifest", v.keyframe_manifest},
           {"human_review_required", v.human_review_required},
           {"human_review_reason", v.human_review_reason},
           {"unavailable", unavailable},
           {"notes", v.notes}};
}

void from_json(const json& j, VerificationReport& v) {
  v.case_id = j.at("case_id").get<std::string>();
  v.metadata = j.at("metadata").get<CaseMetadata>();
  v.cross_validation.reset();
  v.forensic.reset();
  if (!j.at("cross_validation").is_null()) v.cross_validation = j["cross_validation"].get<CrossValidation>();
  if (!j.at("forensic").is_null()) v.forensic = j["forensic"].get<ForensicAnalysis>();
  v.transcripts = j.at("transcripts").get<std::vector<Transcript>>();
  v.sources = j.at("sources").get<std::vector<SourceDocument>>();
  v.keyframe_manifest = j.at("keyframe_manifest").get<std::vector<Keyframe>>();
  v.human_review_required = j.at("human_review_required").get<bool>();
  v.human_review_reason = j.at("human_review_reason").get<std::string>();
  v.unavailable.clear();
  // nlohmann objects iterate in key order; the report writer emits sections
  // in that same order so the round trip is exact.
  for (const auto& [section, reason] : j.at("unavailable").items()) {
    v.unavailable.emplace_back(section, reason.get<std::string>());
  }
  v.notes = j.at("notes").get<std::vector<std::string>>();
}

}  // namespace mmv
