#include "mmv/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include "mmv/error.hpp"
#include "mmv/image.hpp"
#include "mmv/keyframes.hpp"
#include "mmv/report.hpp"
#include "mmv/sidecar.hpp"
#include "mmv/verification.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad_config(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

// Calls f(key, value) for every member; f returns false for keys it does not know.
template <typename F>
void each_member(const json& j, const std::string& where, F&& f) {
  if (!j.is_object()) bad_config(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
      known = f(key, value);
    } catch (const json::exception& e) {
      bad_config(where + "." + key + ": " + e.what());
    }
    if (!known) bad_config("unknown config key '" + where + "." + key + "'");
  }
}

void apply_clustering(ClusteringConfig& c, bool& seeded, const json& j) {
  each_member(j, "clustering", [&](const std::string& k, const json& v) {
    if (k == "k_min") c.k_min = v.get<int>();
    else if (k == "k_max") c.k_max = v.get<int>();
    else if (k == "seed") { c.seed = v.get<std::uint64_t>(); seeded = true; }
    else if (k == "max_iters") c.max_iters = v.get<int>();
    else if (k == "tol") c.tol = v.get<double>();
    else if (k == "frames_per_cluster") c.frames_per_cluster = v.get<int>();
    else if (k == "case_budget") c.case_budget = v.get<int>();
    else return false;
    return true;
  });
}

void apply_shot(ShotDetectorConfig& s, const json& j) {
  each_member(j, "shot", [&](const std::string& k, const json& v) {
    if (k == "detector") {
      const auto name = v.get<std::string>();
      if (name == "histogram") s.detector = DetectorKind::histogram;
      else if (name == "sidecar") s.detector = DetectorKind::sidecar;
      else bad_config("shot.detector must be \"histogram\" or \"sidecar\"");
    } else if (k == "boundary_threshold") s.boundary_threshold = v.get<double>();
    else if (k == "min_shot_len") s.min_shot_len = v.get<int>();
    else if (k == "sample_fps") s.sample_fps = v.get<double>();
    else return false;
    return true;
  });
}

void apply_embedder(EmbedderConfig& e, const json& j) {
  each_member(j, "embedder", [&](const std::string& k, const json& v) {
    if (k == "embedder") {
      const auto name = v.get<std::string>();
      if (name == "classical") e.embedder = EmbedderKind::classical;
      else if (name == "sidecar") e.embedder = EmbedderKind::sidecar;
      else bad_config("embedder.embedder must be \"classical\" or \"sidecar\"");
    } else if (k == "normalize") e.normalize = v.get<bool>();
    else if (k == "fallback_to_classical") e.fallback_to_classical = v.get<bool>();
    else return false;
    return true;
  });
}

void apply_fetch(FetchOptions& f, const json& j) {
  each_member(j, "fetch", [&](const std::string& k, const json& v) {
    if (k == "max_in_flight") f.max_in_flight = v.get<int>();
    else if (k == "politeness_delay_ms") f.politeness_delay = std::chrono::milliseconds(v.get<std::int64_t>());
    else if (k == "max_bytes") f.max_bytes = v.get<std::size_t>();
    else return false;
    return true;
  });
}

void apply_retry(RetryPolicy& r, const json& j) {
  each_member(j, "retry", [&](const std::string& k, const json& v) {
    if (k == "attempts") r.attempts = v.get<int>();
    else if (k == "initial_delay_ms") r.initial_delay = std::chrono::milliseconds(v.get<std::int64_t>());
    else if (k == "multiplier") r.multiplier = v.get<double>();
    else return false;
    return true;
  });
}

void apply_api(ApiConfig& a, const json& j) {
  each_member(j, "api", [&](const std::string& k, const json& v) {
    if (k == "llm_endpoint") a.llm_endpoint = v.get<std::string>();
    else if (k == "llm_api_key") a.llm_api_key = v.get<std::string>();
    else if (k == "llm_model") a.llm_model = v.get<std::string>();
    else if (k == "search_endpoint") a.search_endpoint = v.get<std::string>();
    else if (k == "search_api_key") a.search_api_key = v.get<std::string>();
    else if (k == "transcribe_endpoint") a.transcribe_endpoint = v.get<std::string>();
    else if (k == "transcribe_api_key") a.transcribe_api_key = v.get<std::string>();
    else if (k == "transcribe_model") a.transcribe_model = v.get<std::string>();
    else return false;
    return true;
  });
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::PersistFailure, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(Errc::PersistFailure, "cannot write " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::PersistFailure, "cannot write " + path.string() + ": " + ec.message());
}

std::optional<json> read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return j;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::PersistFailure, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void no_sleep(std::chrono::milliseconds) {}

json stage_record(std::string_view status, const std::string& reason, const std::vector<std::string>& notes,
                  const std::vector<std::string>& review, json value) {
  return json{{"status", status},
              {"reason", reason},
              {"notes", notes},
              {"review_reasons", review},
              {"value", std::move(value)}};
}

// One keyframe candidate before the case-wide budget pass.
struct Candidate {
  Keyframe keyframe;
  Embedding embedding;
  RgbImage image;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  const FrameRef& x = a.keyframe.frame;
  const FrameRef& y = b.keyframe.frame;
  if (x.asset_id != y.asset_id) return x.asset_id < y.asset_id;
  if (x.timestamp_s != y.timestamp_s) return x.timestamp_s < y.timestamp_s;
  return x.frame_index < y.frame_index;
}

struct MediaOutcome {
  json shots;
  std::vector<PreparedImage> images;
  json transcripts;
  std::vector<std::string> review;
};

struct SidecarHandles {
  std::unique_ptr<SidecarClient> client;
  std::unique_ptr<SidecarScorer> scorer;
  std::unique_ptr<SidecarEmbedder> embedder;
};

SidecarHandles start_sidecar(const PipelineConfig& cfg, std::vector<std::string>& notes) {
  SidecarHandles h;
  const bool wanted = cfg.shot.detector == DetectorKind::sidecar || cfg.embedder.embedder == EmbedderKind::sidecar;
  if (!wanted) return h;
  if (cfg.sidecar_command.empty()) {
    notes.push_back("sidecar requested but no sidecar_command configured; using classical models");
    return h;
  }
  try {
    h.client = SidecarClient::launch(split_command(cfg.sidecar_command));
    const SidecarCapabilities& caps = h.client->handshake();
    if (caps.supports_shot_scores) h.scorer = std::make_unique<SidecarScorer>(*h.client);
    if (caps.embedding_dim > 0) h.embedder = std::make_unique<SidecarEmbedder>(*h.client);
  } catch (const Error& e) {
    notes.push_back(std::string("sidecar unavailable: ") + e.what() + "; using classical models");
    h = {};
  }
  return h;
}

std::string seconds_text(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", s);
  return buf;
}

MediaOutcome process_media(const Case& c, const PipelineConfig& cfg, Clients& clients) {
  MediaOutcome out;
  std::vector<std::string> notes;
  ClusteringConfig clustering = cfg.clustering;
  if (!cfg.seed_overridden) clustering.seed = case_seed(c.case_id);

  SidecarHandles sidecar = start_sidecar(cfg, notes);
  TransitionScorer* scorer = cfg.shot.detector == DetectorKind::sidecar ? sidecar.scorer.get() : nullptr;
  FrameEmbedder* embedder = cfg.embedder.embedder == EmbedderKind::sidecar ? sidecar.embedder.get() : nullptr;

  DecodeOptions decode;
  decode.sample_fps = cfg.shot.sample_fps;
  decode.analysis_max_side = cfg.analysis_max_side;

  std::vector<Candidate> candidates;
  std::vector<FrameRef> image_refs;
  std::vector<Embedding> image_embeddings;
  std::map<std::string, RgbImage> still_images;
  std::vector<PcmStream> streams;
  streams.reserve(c.assets.size());
  json assets = json::array();

  for (const MediaAsset& asset : c.assets) {
    json entry = {{"asset_id", asset.asset_id}, {"kind", to_string(asset.kind)}};
    bool undecodable = false;
    try {
      if (asset.kind == MediaKind::image) {
        RgbImage img = shrink_to_fit(load_image(asset.path), cfg.analysis_max_side);
        const RgbImage* ptr = &img;
        auto emb = embed_frames(FrameList(&ptr, 1), cfg.embedder, embedder);
        entry["width"] = img.width;
        entry["height"] = img.height;
        image_refs.push_back({asset.asset_id, 0, 0.0});
        image_embeddings.push_back(std::move(emb.front()));
        still_images.emplace(asset.asset_id, std::move(img));
      } else {
        FrameSequence seq = clients.decoder->decode_video(asset.path, asset.asset_id, decode);
        if (seq.empty()) throw Error(Errc::DecodeFailure, "no frames decoded");
        const auto sampled = detect_shots(seq, cfg.shot, scorer);
        const auto native = to_native_shots(seq, sampled);
        const auto pointers = frame_pointers(seq);
        const auto embeddings = embed_frames(pointers, cfg.embedder, embedder);
        for (std::size_t s = 0; s < sampled.size(); ++s) {
          const auto first = static_cast<std::size_t>(sampled[s].start_frame);
          const auto last = static_cast<std::size_t>(sampled[s].end_frame);
          std::vector<FrameRef> refs;
          std::map<std::int64_t, std::size_t> by_index;
          for (std::size_t i = first; i <= last; ++i) {
            refs.push_back(seq.frames[i].ref);
            by_index[seq.frames[i].ref.frame_index] = i;
          }
          const std::span<const Embedding> slice(embeddings.data() + first, last - first + 1);
          for (Keyframe& kf : select_shot_keyframes(native[s], refs, slice, clustering)) {
            const std::size_t i = by_index.at(kf.frame.frame_index);
            candidates.push_back({std::move(kf), embeddings[i], seq.frames[i].image});
          }
        }
        entry["duration_s"] = seq.duration_s();
        entry["native_fps"] = seq.native_fps;
        entry["native_frame_count"] = seq.native_frame_count;
        entry["sample_stride"] = seq.sample_stride;
        entry["shots"] = native;
      }
      entry["status"] = "ok";
      entry["error"] = "";
    } catch (const Error& e) {
      entry["status"] = "failed";
      entry["error"] = e.what();
      undecodable = e.code() == Errc::DecodeFailure;
      const std::string kind = undecodable ? "decode failure" : "media processing failed";
      out.review.push_back(kind + ": " + asset.asset_id + ": " + e.what());
    }

    if (asset.kind == MediaKind::video && undecodable) {
      notes.push_back(asset.asset_id + ": audio skipped, container undecodable");
    } else if (asset.kind == MediaKind::video) {
      try {
        PcmStream pcm = clients.decoder->extract_audio(asset.path, asset.asset_id);
        if (pcm.has_audio) {
          streams.push_back(std::move(pcm));
        } else {
          notes.push_back(asset.asset_id + ": no audio track");
        }
      } catch (const Error& e) {
        out.review.push_back("decode failure: " + asset.asset_id + " (audio): " + e.what());
      }
    }
    assets.push_back(std::move(entry));
  }

  if (!image_refs.empty()) {
    for (Keyframe& kf : select_image_keyframes(image_refs, image_embeddings, clustering)) {
      const auto it = std::find(image_refs.begin(), image_refs.end(), kf.frame);
      const std::size_t i = static_cast<std::size_t>(it - image_refs.begin());
      candidates.push_back({std::move(kf), image_embeddings[i], still_images.at(image_refs[i].asset_id)});
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(), candidate_before);
  std::vector<Keyframe> kfs;
  std::vector<Embedding> embs;
  for (const Candidate& cand : candidates) {
    kfs.push_back(cand.keyframe);
    embs.push_back(cand.embedding);
  }
  std::vector<Keyframe> chosen;
  std::vector<RgbImage> chosen_images;
  if (!kfs.empty()) {
    for (std::size_t i : aggregate_case_keyframe_indices(kfs, embs, clustering)) {
      chosen.push_back(kfs[i]);
      chosen_images.push_back(candidates[i].image);
    }
  }
  out.images = prepare_llm_images(chosen, chosen_images, cfg.image_max_side, cfg.jpeg_quality);

  std::vector<AssetAudio> audio;
  for (const PcmStream& s : streams) {
    audio.push_back({&s, chunk_audio(s, cfg.chunk_seconds, cfg.min_chunk_seconds)});
  }
  try {
    const auto transcripts =
        transcribe_case(audio, *clients.transcriber, cfg.language_hint, cfg.transcribe_in_flight);
    out.transcripts = {{"status", "ok"}, {"reason", ""}, {"transcripts", transcripts}};
  } catch (const Error& e) {
    out.transcripts = {{"status", "failed"}, {"reason", e.what()}, {"transcripts", json::array()}};
  }

  out.shots = {{"assets", std::move(assets)}, {"notes", notes}, {"review_reasons", out.review}};
  return out;
}

MediaOutcome failed_media(const Error& e) {
  MediaOutcome out;
  out.review.push_back(std::string("media stage failed: ") + e.what());
  out.shots = {{"assets", json::array()}, {"notes", json::array()}, {"review_reasons", out.review}};
  out.transcripts = {{"status", "failed"}, {"reason", e.what()}, {"transcripts", json::array()}};
  return out;
}

void write_media(const fs::path& out_dir, const MediaOutcome& m) {
  write_text(out_dir / kShotsFile, dump_json(m.shots));
  write_keyframe_manifest(out_dir, m.images);
  write_text(out_dir / kTranscriptsFile, dump_json(m.transcripts));
}

bool media_cached(const fs::path& out_dir) {
  return fs::exists(out_dir / kShotsFile) && fs::exists(out_dir / kKeyframesFile) &&
         fs::exists(out_dir / kTranscriptsFile);
}

std::vector<std::string> review_reasons_of(const std::optional<json>& record) {
  if (!record || !record->is_object()) return {};
  return record->value("review_reasons", std::vector<std::string>{});
}

RetrievalOptions retrieval_options(const PipelineConfig& cfg) {
  RetrievalOptions r;
  r.k = cfg.search_k;
  r.refresh = cfg.refresh;
  r.retry = cfg.retry;
  r.fetch = cfg.fetch;
  return r;
}

RetrievalOutcome gather_safely(const Case& c, const fs::path& out_dir, const PipelineConfig& cfg, Clients& clients) {
  try {
    return gather_evidence(c, out_dir, *clients.search, *clients.fetcher, retrieval_options(cfg), clients.sleep);
  } catch (const Error& e) {
    RetrievalOutcome failed;
    failed.buffer.case_id = c.case_id;
    failed.notes.push_back(std::string("retrieval failed: ") + e.what());
    failed.notes.push_back("no external sources");
    return failed;
  }
}

void persist_evidence(const fs::path& out_dir, const RetrievalOutcome& r) {
  if (r.from_cache) return;
  EvidenceBuffer buffer = r.buffer;
  buffer.fetched_at = utc_timestamp_now();
  write_evidence(out_dir, buffer, r.notes);
}

// A cached record is reused only when it did not fail; failures are retried.
std::optional<json> reusable(const fs::path& path, bool allowed) {
  if (!allowed) return std::nullopt;
  auto record = read_json_file(path);
  if (!record || !record->is_object() || record->value("status", "") == "failed") return std::nullopt;
  return record;
}

template <typename T>
json step_record(const StepResult<T>& r, std::string_view step) {
  std::vector<std::string> review;
  std::string status = "ok";
  if (r.refusal) {
    status = "refused";
    review.push_back(std::string(step) + " refused by the model");
  } else if (!r.value) {
    status = "failed";
  }
  return stage_record(status, r.failure, r.notes, review, r.value ? json(*r.value) : json(nullptr));
}

json auth_failure_record(const Error& e) { return stage_record("failed", e.what(), {}, {}, nullptr); }

std::vector<ForensicImage> forensic_images(const Case& c, const fs::path& out_dir) {
  std::vector<ForensicImage> images;
  for (const ManifestEntry& entry : read_keyframe_manifest(out_dir)) {
    const FrameRef& f = entry.keyframe.frame;
    std::string label = entry.image_path.filename().string() + " (" + f.asset_id;
    const auto asset = std::find_if(c.assets.begin(), c.assets.end(),
                                    [&](const MediaAsset& a) { return a.asset_id == f.asset_id; });
    if (asset != c.assets.end() && asset->kind == MediaKind::video) {
      label += " @ " + seconds_text(f.timestamp_s) + " s";
    }
    label += ")";
    images.push_back({std::move(label), base64_encode(read_bytes(entry.image_path))});
  }
  return images;
}

std::vector<Transcript> cached_transcripts(const fs::path& out_dir) {
  const auto j = read_json_file(out_dir / kTranscriptsFile);
  if (!j || !j->is_object() || !j->contains("transcripts")) return {};
  return (*j)["transcripts"].get<std::vector<Transcript>>();
}

VerificationOptions verification_options(const PipelineConfig& cfg, const Clients& clients) {
  return VerificationOptions{cfg.retry, clients.sleep};
}

void prepare_output(const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(Errc::PersistFailure, "cannot create " + out_dir.string() + ": " + ec.message());
}

}  // namespace

void PipelineConfig::validate() const {
  clustering.validate();
  shot.validate();
  if (analysis_max_side < 16) bad_config("analysis_max_side must be at least 16");
  if (search_k < 1) bad_config("search_k must be at least 1");
  if (!(chunk_seconds > 0.0)) bad_config("chunk_seconds must be positive");
  if (!(min_chunk_seconds >= 0.0) || min_chunk_seconds > chunk_seconds) {
    bad_config("min_chunk_seconds must lie in [0, chunk_seconds]");
  }
  if (!is_valid_language_hint(language_hint)) bad_config("unknown language_hint '" + language_hint + "'");
  if (transcribe_in_flight < 1) bad_config("transcribe_in_flight must be at least 1");
  if (image_max_side < 1) bad_config("image_max_side must be positive");
  if (jpeg_quality < 1 || jpeg_quality > 100) bad_config("jpeg_quality must lie in [1, 100]");
  if (fetch.max_in_flight < 1) bad_config("fetch.max_in_flight must be at least 1");
  if (fetch.politeness_delay.count() < 0) bad_config("fetch.politeness_delay_ms must not be negative");
  if (retry.attempts < 1) bad_config("retry.attempts must be at least 1");
  if (!(retry.multiplier >= 1.0)) bad_config("retry.multiplier must be at least 1");
}

void apply_config_json(PipelineConfig& cfg, const json& j) {
  each_member(j, "config", [&](const std::string& k, const json& v) {
    if (k == "clustering") apply_clustering(cfg.clustering, cfg.seed_overridden, v);
    else if (k == "shot") apply_shot(cfg.shot, v);
    else if (k == "embedder") apply_embedder(cfg.embedder, v);
    else if (k == "fetch") apply_fetch(cfg.fetch, v);
    else if (k == "retry") apply_retry(cfg.retry, v);
    else if (k == "api") apply_api(cfg.api, v);
    else if (k == "analysis_max_side") cfg.analysis_max_side = v.get<int>();
    else if (k == "search_k") cfg.search_k = v.get<int>();
    else if (k == "chunk_seconds") cfg.chunk_seconds = v.get<double>();
    else if (k == "min_chunk_seconds") cfg.min_chunk_seconds = v.get<double>();
    else if (k == "language_hint") cfg.language_hint = v.get<std::string>();
    else if (k == "transcribe_in_flight") cfg.transcribe_in_flight = v.get<int>();
    else if (k == "image_max_side") cfg.image_max_side = v.get<int>();
    else if (k == "jpeg_quality") cfg.jpeg_quality = v.get<int>();
    else if (k == "offline") cfg.offline = v.get<bool>();
    else if (k == "refresh") cfg.refresh = v.get<bool>();
    else if (k == "output_dir") cfg.output_dir = v.get<std::string>();
    else if (k == "stub_dir") cfg.stub_dir = v.get<std::string>();
    else if (k == "decoder_path") cfg.decoder_path = v.get<std::string>();
    else if (k == "sidecar_command") cfg.sidecar_command = v.get<std::string>();
    else return false;
    return true;
  });
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) bad_config("cannot open config file " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) bad_config(path.string() + " is not valid JSON");
  PipelineConfig cfg;
  apply_config_json(cfg, j);
  return cfg;
}

void apply_env_overrides(PipelineConfig& cfg, const std::function<const char*(const char*)>& getenv_fn) {
  const std::pair<const char*, std::string*> vars[] = {
      {"LLM_API_KEY", &cfg.api.llm_api_key},         {"LLM_API_ENDPOINT", &cfg.api.llm_endpoint},
      {"LLM_MODEL", &cfg.api.llm_model},             {"SEARCH_API_KEY", &cfg.api.search_api_key},
      {"SEARCH_API_ENDPOINT", &cfg.api.search_endpoint}, {"TRANSCRIBE_API_KEY", &cfg.api.transcribe_api_key},
  };
  for (const auto& [name, field] : vars) {
    if (const char* value = getenv_fn(name); value && *value) *field = value;
  }
}

std::uint64_t case_seed(std::string_view case_id) {
  const std::string hex = sha256_hex(case_id);
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::ingested: return "ingested";
    case Stage::media_done: return "media_done";
    case Stage::evidence_done: return "evidence_done";
    case Stage::crossval_done: return "crossval_done";
    case Stage::forensic_done: return "forensic_done";
    case Stage::reported: return "reported";
  }
  return "unknown";
}

void CaseStatus::advance(Stage next) {
  if (next > stage) stage = next;
}

void CaseStatus::flag(std::string reason) {
  human_review_required = true;
  if (std::find(reasons.begin(), reasons.end(), reason) == reasons.end()) reasons.push_back(std::move(reason));
}

bool is_pipeline_output(const fs::path& name) {
  const std::string n = name.filename().string();
  static constexpr std::string_view kOutputs[] = {kShotsFile,   kKeyframesFile,        kTranscriptsFile,
                                                  kEvidenceFile, kEvidenceMetaFile,     kCrossValidationFile,
                                                  kForensicFile, kReportJsonFile,       kReportMdFile};
  if (std::find(std::begin(kOutputs), std::end(kOutputs), n) != std::end(kOutputs)) return true;
  if (n.rfind("kf_", 0) == 0 && name.extension() == ".jpg") return true;
  return n.size() > 4 && n.compare(n.size() - 4, 4, ".tmp") == 0;
}

Case load_case(const fs::path& case_dir) {
  std::error_code ec;
  if (!fs::is_directory(case_dir, ec)) throw Error(Errc::InvalidCase, "no case directory at " + case_dir.string());
  const fs::path metadata = case_dir / "metadata.json";
  if (!fs::is_regular_file(metadata, ec)) throw Error(Errc::InvalidCase, "missing " + metadata.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(case_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_regular_file() || name.empty() || name[0] == '.') continue;
    if (name == "metadata.json" || is_pipeline_output(entry.path())) continue;
    files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<MediaAsset> assets;
  for (const fs::path& f : files) {
    MediaAsset a;
    a.asset_id = f.filename().string();
    a.path = f;
    assets.push_back(std::move(a));
  }
  fs::path canonical = fs::weakly_canonical(case_dir, ec);
  if (ec) canonical = case_dir;
  std::string case_id = canonical.filename().string();
  if (case_id.empty()) case_id = canonical.parent_path().filename().string();
  return validate_case(std::move(case_id), read_case_metadata(metadata), std::move(assets), false);
}

StubCounters Clients::counters() const {
  StubCounters c;
  if (auto* s = dynamic_cast<const StubSearchClient*>(search.get())) c.search = s->calls();
  if (auto* f = dynamic_cast<const StubPageFetcher*>(fetcher.get())) c.fetch = f->calls();
  if (auto* t = dynamic_cast<const StubTranscriptionClient*>(transcriber.get())) c.transcribe = t->calls();
  if (auto* l = dynamic_cast<const StubLlmClient*>(llm.get())) c.llm = l->calls();
  return c;
}

Clients make_clients(const PipelineConfig& cfg, const fs::path& case_dir) {
  Clients clients;
  clients.decoder = make_decoder(cfg.decoder_path);
  if (cfg.offline) {
    const fs::path stubs = cfg.stub_dir.empty() ? case_dir / "stubs" : cfg.stub_dir;
    clients.search = std::make_unique<StubSearchClient>(stubs);
    clients.fetcher = std::make_unique<StubPageFetcher>(stubs, cfg.fetch.max_bytes);
    clients.transcriber = std::make_unique<StubTranscriptionClient>(stubs);
    clients.llm = std::make_unique<StubLlmClient>(stubs);
    clients.sleep = no_sleep;
    return clients;
  }
  auto transport = std::make_shared<CurlTransport>();
  clients.search = std::make_unique<HttpSearchClient>(transport, cfg.api.search_endpoint, cfg.api.search_api_key);
  clients.fetcher = std::make_unique<HttpPageFetcher>(transport, std::chrono::seconds(15), cfg.fetch.max_bytes);
  clients.transcriber = std::make_unique<HttpTranscriptionClient>(
      transport, cfg.api.transcribe_endpoint, cfg.api.transcribe_api_key, cfg.api.transcribe_model);
  clients.llm = std::make_unique<HttpLlmClient>(transport, cfg.api.llm_endpoint, cfg.api.llm_api_key,
                                                cfg.api.llm_model, std::make_shared<RateLimiter>(std::chrono::seconds(1)));
  return clients;
}

fs::path output_dir_for(const fs::path& case_dir, const PipelineConfig& cfg) {
  return cfg.output_dir.empty() ? case_dir : cfg.output_dir;
}

CaseStatus run_media_stage(const fs::path& case_dir, const PipelineConfig& cfg, Clients& clients) {
  cfg.validate();
  const Case c = load_case(case_dir);
  const fs::path out_dir = output_dir_for(case_dir, cfg);
  prepare_output(out_dir);
  if (cfg.refresh || !media_cached(out_dir)) {
    MediaOutcome media;
    try {
      media = process_media(c, cfg, clients);
    } catch (const Error& e) {
      media = failed_media(e);
    }
    write_media(out_dir, media);
  }
  CaseStatus status = status_from_cache(c, out_dir);
  status.advance(Stage::media_done);
  return status;
}

CaseStatus run_evidence_stage(const fs::path& case_dir, const PipelineConfig& cfg, Clients& clients) {
  cfg.validate();
  const Case c = load_case(case_dir);
  const fs::path out_dir = output_dir_for(case_dir, cfg);
  prepare_output(out_dir);
  persist_evidence(out_dir, gather_safely(c, out_dir, cfg, clients));
  CaseStatus status = status_from_cache(c, out_dir);
  status.advance(Stage::evidence_done);
  return status;
}

CaseStatus run_case(const fs::path& case_dir, const PipelineConfig& cfg, Clients& clients) {
  cfg.validate();
  const Case c = load_case(case_dir);
  const fs::path out_dir = output_dir_for(case_dir, cfg);
  prepare_output(out_dir);

  CaseStatus status;
  status.case_id = c.case_id;

  const bool media_fresh = cfg.refresh || !media_cached(out_dir);
  auto evidence = std::async(std::launch::async, [&] { return gather_safely(c, out_dir, cfg, clients); });
  std::optional<MediaOutcome> media;
  std::exception_ptr media_error;
  if (media_fresh) {
    try {
      media = process_media(c, cfg, clients);
    } catch (const Error& e) {
      media = failed_media(e);
    } catch (...) {
      media_error = std::current_exception();
    }
  }
  const RetrievalOutcome retrieved = evidence.get();
  if (media_error) std::rethrow_exception(media_error);
  if (media) write_media(out_dir, *media);
  status.advance(Stage::media_done);
  persist_evidence(out_dir, retrieved);
  status.advance(Stage::evidence_done);

  const VerificationOptions vopts = verification_options(cfg, clients);
  const bool crossval_fresh = !reusable(out_dir / kCrossValidationFile, !cfg.refresh && retrieved.from_cache);
  if (crossval_fresh) {
    json record;
    try {
      record = step_record(run_cross_validation(retrieved.buffer, *clients.llm, vopts), "cross-validation");
    } catch (const Error& e) {
      if (e.code() != Errc::AuthError) throw;
      record = auth_failure_record(e);
    }
    write_text(out_dir / kCrossValidationFile, dump_json(record));
  }
  status.advance(Stage::crossval_done);

  const bool forensic_reuse = !cfg.refresh && !media_fresh && !crossval_fresh;
  if (!reusable(out_dir / kForensicFile, forensic_reuse)) {
    json record;
    const auto crossval_record = read_json_file(out_dir / kCrossValidationFile);
    std::optional<CrossValidation> crossval;
    if (crossval_record && crossval_record->is_object() && crossval_record->contains("value") &&
        !(*crossval_record)["value"].is_null()) {
      crossval = (*crossval_record)["value"].get<CrossValidation>();
    }
    const auto images = forensic_images(c, out_dir);
    const auto transcripts = cached_transcripts(out_dir);
    if (images.empty()) {
      record = stage_record("skipped", "no keyframes to analyse", {}, {}, nullptr);
    } else {
      try {
        record = step_record(
            run_forensic_analysis(images, crossval, c.metadata, transcripts, *clients.llm, vopts), "forensic analysis");
      } catch (const Error& e) {
        if (e.code() != Errc::AuthError) throw;
        record = auth_failure_record(e);
      }
    }
    write_text(out_dir / kForensicFile, dump_json(record));
  }
  status.advance(Stage::forensic_done);

  assemble_report(load_report_inputs(c, out_dir), out_dir);
  const CaseStatus recorded = status_from_cache(c, out_dir);
  status.human_review_required = recorded.human_review_required;
  status.reasons = recorded.reasons;
  status.advance(Stage::reported);
  return status;
}

CaseStatus status_from_cache(const Case& c, const fs::path& out_dir) {
  CaseStatus status;
  status.case_id = c.case_id;
  const auto shots = read_json_file(out_dir / kShotsFile);
  const auto crossval = read_json_file(out_dir / kCrossValidationFile);
  const auto forensic = read_json_file(out_dir / kForensicFile);
  if (shots) status.advance(Stage::media_done);
  if (fs::exists(out_dir / kEvidenceFile)) status.advance(Stage::evidence_done);
  if (crossval) status.advance(Stage::crossval_done);
  if (forensic) status.advance(Stage::forensic_done);
  if (fs::exists(out_dir / kReportJsonFile)) status.advance(Stage::reported);
  for (const auto* record : {&shots, &crossval, &forensic}) {
    for (auto& reason : review_reasons_of(*record)) status.flag(std::move(reason));
  }
  return status;
}

}  // namespace mmv
