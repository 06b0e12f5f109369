#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/audio.hpp"
#include "mmv/clustering.hpp"
#include "mmv/embedding.hpp"
#include "mmv/evidence.hpp"
#include "mmv/llm.hpp"
#include "mmv/media.hpp"
#include "mmv/model.hpp"
#include "mmv/shots.hpp"

namespace mmv {

struct ApiConfig {
  std::string llm_endpoint = "https://api.openai.com/v1/chat/completions";
  std::string llm_api_key;
  std::string llm_model = "gpt-4o";
  std::string search_endpoint = "https://www.googleapis.com/customsearch/v1";
  std::string search_api_key;
  std::string transcribe_endpoint = "https://api.openai.com/v1/audio/transcriptions";
  std::string transcribe_api_key;
  std::string transcribe_model = "whisper-1";
};

struct PipelineConfig {
  ClusteringConfig clustering;
  // When false the clustering seed is derived from the case id.
  bool seed_overridden = false;
  ShotDetectorConfig shot;
  EmbedderConfig embedder;
  int analysis_max_side = 480;
  int search_k = kDefaultSearchK;
  double chunk_seconds = 30.0;
  double min_chunk_seconds = 1.0;
  std::string language_hint = "auto";
  int transcribe_in_flight = 2;
  int image_max_side = 256;
  int jpeg_quality = 85;
  bool offline = false;
  bool refresh = false;
  std::filesystem::path output_dir;  // empty: the case directory
  std::filesystem::path stub_dir;    // empty: <case>/stubs
  std::string decoder_path;          // empty: in-process decoding
  std::string sidecar_command;
  FetchOptions fetch;
  RetryPolicy retry;
  ApiConfig api;

  // Throws Error{InvalidConfig}.
  void validate() const;
};

// JSON keys mirror the struct (see README). Unknown keys are rejected.
PipelineConfig load_config(const std::filesystem::path& path);
void apply_config_json(PipelineConfig& cfg, const json& j);
// LLM_API_KEY, LLM_API_ENDPOINT, LLM_MODEL, SEARCH_API_KEY,
// SEARCH_API_ENDPOINT, TRANSCRIBE_API_KEY.
void apply_env_overrides(PipelineConfig& cfg,
                         const std::function<const char*(const char*)>& getenv_fn = [](const char* n) {
                           return std::getenv(n);
                         });

// First 8 bytes of SHA-256(case_id), big-endian.
std::uint64_t case_seed(std::string_view case_id);

enum class Stage { ingested, media_done, evidence_done, crossval_done, forensic_done, reported };
std::string_view to_string(Stage stage);

struct CaseStatus {
  std::string case_id;
  Stage stage = Stage::ingested;
  bool human_review_required = false;
  std::vector<std::string> reasons;

  // Never moves backwards.
  void advance(Stage next);
  void flag(std::string reason);
};

// Names of files the pipeline writes next to a case; ingestion skips them.
bool is_pipeline_output(const std::filesystem::path& name);

// metadata.json plus every media file in the directory (sorted by name).
// Throws Error{InvalidCase | EmptyCase | UnsupportedMedia}.
Case load_case(const std::filesystem::path& case_dir);

struct StubCounters {
  int search = 0;
  int fetch = 0;
  int transcribe = 0;
  int llm = 0;

  int total() const { return search + fetch + transcribe + llm; }
};

// The external collaborators of one run. Offline runs get stubs only, built
// from the stub directory; online runs get HTTP clients.
struct Clients {
  std::unique_ptr<SearchClient> search;
  std::unique_ptr<PageFetcher> fetcher;
  std::unique_ptr<TranscriptionClient> transcriber;
  std::unique_ptr<LlmClient> llm;
  std::unique_ptr<MediaDecoder> decoder;
  Sleeper sleep = real_sleep;

  StubCounters counters() const;
};

Clients make_clients(const PipelineConfig& cfg, const std::filesystem::path& case_dir);

// Cache files, all inside the output directory.
inline constexpr std::string_view kShotsFile = "shots.json";
inline constexpr std::string_view kKeyframesFile = "keyframes.json";
inline constexpr std::string_view kTranscriptsFile = "transcripts.json";
inline constexpr std::string_view kEvidenceFile = "evidence.json";
inline constexpr std::string_view kEvidenceMetaFile = "evidence.meta.json";
inline constexpr std::string_view kCrossValidationFile = "crossval.json";
inline constexpr std::string_view kForensicFile = "forensic.json";
inline constexpr std::string_view kReportJsonFile = "report.json";
inline constexpr std::string_view kReportMdFile = "report.md";

std::filesystem::path output_dir_for(const std::filesystem::path& case_dir, const PipelineConfig& cfg);

// Media branch only: shots.json, keyframes.json + kf_<n>.jpg, transcripts.json.
CaseStatus run_media_stage(const std::filesystem::path& case_dir, const PipelineConfig& cfg, Clients& clients);
// Retrieval branch only: evidence.json + evidence.meta.json.
CaseStatus run_evidence_stage(const std::filesystem::path& case_dir, const PipelineConfig& cfg, Clients& clients);

// ingest -> (media || evidence) -> cross-validation -> forensic -> report.
// Only PersistFailure and InvalidConfig (and unreadable case input) escape.
CaseStatus run_case(const std::filesystem::path& case_dir, const PipelineConfig& cfg, Clients& clients);

// Review flags and reasons as recorded in the cache files.
CaseStatus status_from_cache(const Case& c, const std::filesystem::path& out_dir);

}  // namespace mmv
