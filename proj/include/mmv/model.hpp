#pragma once

// Domain types shared by every stage of the pipeline. Values are plain
// aggregates: construct, validate, serialize. Nothing here does I/O except
// the metadata.json reader.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mmv {

using json = nlohmann::json;

inline constexpr std::string_view kFetchFailedMarker = "Failed to fetch the page.";
inline constexpr std::string_view kDateNotAvailable = "Not available";

struct CaseMetadata {
  std::string location_hint;
  std::string violence_level;
  std::string title;
  std::string media_link;
  std::string description;
  std::string category;

  // Retrieval needs at least one of title/description.
  bool has_searchable_text() const;

  bool operator==(const CaseMetadata&) const = default;
};

enum class MediaKind { video, image };

std::string_view to_string(MediaKind kind);

struct MediaAsset {
  std::string asset_id;
  MediaKind kind = MediaKind::video;
  std::filesystem::path path;
  // Videos only. Absent until the media stage has probed the stream.
  std::optional<double> duration_s;

  bool operator==(const MediaAsset&) const = default;
};

struct Case {
  std::string case_id;
  CaseMetadata metadata;
  std::vector<MediaAsset> assets;

  bool operator==(const Case&) const = default;
};

struct FrameRef {
  std::string asset_id;
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;

  bool operator==(const FrameRef&) const = default;
};

// Inclusive frame interval [start_frame, end_frame].
struct Shot {
  std::string asset_id;
  std::int64_t start_frame = 0;
  std::int64_t end_frame = 0;

  std::int64_t length() const { return end_frame - start_frame + 1; }
  bool operator==(const Shot&) const = default;
};

struct Embedding {
  std::vector<double> vector;
  std::string extractor_id;

  std::size_t dim() const { return vector.size(); }
  bool operator==(const Embedding&) const = default;
};

struct Keyframe {
  FrameRef frame;
  Shot shot;
  int cluster_id = 0;
  double distance_to_centroid = 0.0;

  bool operator==(const Keyframe&) const = default;
};

struct AudioChunk {
  std::string asset_id;
  int index = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  // Slice of the asset's PCM stream.
  std::int64_t sample_offset = 0;
  std::int64_t sample_count = 0;

  double duration_s() const { return end_s - start_s; }
  bool operator==(const AudioChunk&) const = default;
};

struct TranscriptSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  std::string error;  // empty when the chunk transcribed cleanly

  bool operator==(const TranscriptSegment&) const = default;
};

struct Transcript {
  std::string asset_id;
  std::string language = "auto";
  std::vector<TranscriptSegment> segments;

  bool operator==(const Transcript&) const = default;
};

struct SourceDocument {
  std::string link;
  std::string date{kDateNotAvailable};
  std::string title;
  std::string content;
  // 1..n for search results; 0 is reserved for the case's own media link.
  int rank = 1;
  bool exact_match = false;

  bool fetch_failed() const { return content == kFetchFailedMarker; }
  bool operator==(const SourceDocument&) const = default;
};

using CalendarDate = std::chrono::year_month_day;

struct DateSpan {
  CalendarDate earliest;
  CalendarDate latest;

  // latest - earliest in whole days
  int days() const;
  bool operator==(const DateSpan&) const = default;
};

std::string format_iso_date(const CalendarDate& date);
CalendarDate parse_iso_date(std::string_view text);

enum class ConsensusLabel { Consensus, Partial, NonVerifiable };

std::string_view to_string(ConsensusLabel label);
std::optional<ConsensusLabel> consensus_label_from_string(std::string_view text);

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;

  bool valid() const;
  bool operator==(const GeoPoint&) const = default;
};

struct CrossValidation {
  std::string location_name;
  std::optional<GeoPoint> coordinates;
  std::optional<DateSpan> date_span;
  std::string date_text;  // the model's date field, as written
  ConsensusLabel consensus = ConsensusLabel::NonVerifiable;
  std::string notes;
  std::string consensus_about;
  std::string conflicts;
  std::vector<std::string> tags;

  bool operator==(const CrossValidation&) const = default;
};

struct MetadataValidation {
  std::string location;
  std::string event;
  std::string people;

  bool operator==(const MetadataValidation&) const = default;
};

struct ForensicAnalysis {
  MetadataValidation metadata_validation;
  std::string authenticity;
  std::string auth_evidence;
  std::string synt_type;
  std::string other;

  bool operator==(const ForensicAnalysis&) const = default;
};

struct VerificationReport {
  std::string case_id;
  CaseMetadata metadata;
  std::optional<CrossValidation> cross_validation;
  std::optional<ForensicAnalysis> forensic;
  std::vector<Transcript> transcripts;
  std::vector<SourceDocument> sources;
  std::vector<Keyframe> keyframe_manifest;
  bool human_review_required = false;
  std::string human_review_reason;
  // Section name -> "not available" reason, for every stage that produced nothing.
  std::vector<std::pair<std::string, std::string>> unavailable;
  std::vector<std::string> notes;

  bool operator==(const VerificationReport&) const = default;
};

// Builds a Case from raw inputs. Asset kinds are re-derived from the file
// extension. Throws Error{EmptyCase | UnsupportedMedia | EmptyMetadata}.
// With require_searchable_metadata=false the EmptyMetadata check is left to
// the caller (the pipeline still processes media for such cases).
Case validate_case(std::string case_id, CaseMetadata metadata, std::vector<MediaAsset> assets,
                   bool require_searchable_metadata = true);

// Kind for a path's extension (mp4 / jpg / jpeg / png, case-insensitive).
std::optional<MediaKind> media_kind_for(const std::filesystem::path& path);

CaseMetadata read_case_metadata(const std::filesystem::path& metadata_json);

// JSON shapes. CaseMetadata uses the challenge's keys ("violence level",
// "media link", ...); everything else uses snake_case field names.
void to_json(json& j, const CaseMetadata& v);
void from_json(const json& j, CaseMetadata& v);
void to_json(json& j, const MediaAsset& v);
void from_json(const json& j, MediaAsset& v);
void to_json(json& j, const Case& v);
void from_json(const json& j, Case& v);
void to_json(json& j, const FrameRef& v);
void from_json(const json& j, FrameRef& v);
void to_json(json& j, const Shot& v);
void from_json(const json& j, Shot& v);
void to_json(json& j, const Embedding& v);
void from_json(const json& j, Embedding& v);
void to_json(json& j, const Keyframe& v);
void from_json(const json& j, Keyframe& v);
void to_json(json& j, const AudioChunk& v);
void from_json(const json& j, AudioChunk& v);
void to_json(json& j, const TranscriptSegment& v);
void from_json(const json& j, TranscriptSegment& v);
void to_json(json& j, const Transcript& v);
void from_json(const json& j, Transcript& v);
void to_json(json& j, const SourceDocument& v);
void from_json(const json& j, SourceDocument& v);
void to_json(json& j, const DateSpan& v);
void from_json(const json& j, DateSpan& v);
void to_json(json& j, const GeoPoint& v);
void from_json(const json& j, GeoPoint& v);
void to_json(json& j, const CrossValidation& v);
void from_json(const json& j, CrossValidation& v);
void to_json(json& j, const MetadataValidation& v);
void from_json(const json& j, MetadataValidation& v);
void to_json(json& j, const ForensicAnalysis& v);
void from_json(const json& j, ForensicAnalysis& v);
void to_json(json& j, const VerificationReport& v);
void from_json(const json& j, VerificationReport& v);

// Serialized text for files on disk: 2-space indent, invalid UTF-8 replaced.
std::string dump_json(const json& j);

}  // namespace mmv
