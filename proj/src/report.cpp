#include "mmv/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmv/error.hpp"
#include "mmv/keyframes.hpp"
#include "mmv/pipeline.hpp"
#include "mmv/verification.hpp"

namespace mmv {

namespace fs = std::filesystem;

namespace {

std::optional<json> read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

void append_unique(std::vector<std::string>& out, const std::vector<std::string>& items) {
  for (const auto& item : items) {
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
}

std::vector<std::string> strings_at(const json& j, const char* key) {
  return j.value(key, std::vector<std::string>{});
}

// Reads crossval.json / forensic.json into value + reason.
template <typename T>
void load_step(const fs::path& path, std::string_view step, std::optional<T>& value, std::string& reason,
               ReportInputs& in) {
  const auto record = read_json(path);
  if (!record) {
    reason = std::string(step) + " did not run";
    return;
  }
  append_unique(in.notes, strings_at(*record, "notes"));
  append_unique(in.review_reasons, strings_at(*record, "review_reasons"));
  const std::string status = record->value("status", std::string{});
  if (status == "ok" && record->contains("value") && !(*record)["value"].is_null()) {
    try {
      value = (*record)["value"].get<T>();
      return;
    } catch (const json::exception& e) {
      reason = std::string("unreadable cache: ") + e.what();
      return;
    }
  }
  if (status == "refused") {
    reason = "refused by the model";
  } else {
    reason = record->value("reason", std::string{});
    if (reason.empty()) reason = status.empty() ? std::string("unknown status") : status;
  }
}

std::string md_text(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\n' || c == '\r') {
      out += ' ';
      continue;
    }
    if (c == '[' || c == ']' || c == '*' || c == '_' || c == '`' || c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string md_link(std::string_view label, std::string_view url) {
  std::string target;
  for (char c : url) {
    if (c == ' ') target += "%20";
    else if (c == '(') target += "%28";
    else if (c == ')') target += "%29";
    else target += c;
  }
  return "[" + md_text(label.empty() ? url : label) + "](" + target + ")";
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string section_title(std::string_view key) {
  if (key == kSectionSources) return "Sources";
  if (key == kSectionKeyframes) return "Keyframes";
  if (key == kSectionTranscripts) return "Transcripts";
  if (key == kSectionCrossValidation) return "Cross-validation";
  if (key == kSectionForensic) return "Forensic analysis";
  return std::string(key);
}

const std::string* unavailable_reason(const VerificationReport& r, std::string_view key) {
  for (const auto& [section, reason] : r.unavailable) {
    if (section == key) return &reason;
  }
  return nullptr;
}

void write_unavailable(std::ostringstream& md, const VerificationReport& r, std::string_view key) {
  md << section_title(key) << ": not available: " << *unavailable_reason(r, key) << "\n\n";
}

void write_field(std::ostringstream& md, std::string_view name, std::string_view value) {
  md << "- **" << name << ":** " << (value.empty() ? std::string("(empty)") : md_text(value)) << "\n";
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw Error(Errc::PersistFailure, "cannot write " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::PersistFailure, "cannot write " + path.string() + ": " + ec.message());
}

}  // namespace

ReportInputs load_report_inputs(const Case& c, const fs::path& out_dir) {
  ReportInputs in;
  in.case_info = c;

  if (const auto shots = read_json(out_dir / kShotsFile)) {
    append_unique(in.notes, strings_at(*shots, "notes"));
    append_unique(in.review_reasons, strings_at(*shots, "review_reasons"));
    try {
      std::vector<Keyframe> keyframes;
      for (const ManifestEntry& e : read_keyframe_manifest(out_dir)) keyframes.push_back(e.keyframe);
      if (keyframes.empty()) {
        in.keyframes_reason = "no keyframes could be extracted";
      } else {
        in.keyframes = std::move(keyframes);
      }
    } catch (const Error& e) {
      in.keyframes_reason = e.what();
    }
  } else {
    in.keyframes_reason = "media processing did not run";
  }

  if (const auto t = read_json(out_dir / kTranscriptsFile)) {
    if (t->value("status", std::string{}) == "ok") {
      auto transcripts = t->value("transcripts", json::array()).get<std::vector<Transcript>>();
      if (transcripts.empty()) {
        in.transcripts_reason = "no audio to transcribe";
      } else {
        in.transcripts = std::move(transcripts);
      }
    } else {
      in.transcripts_reason = "transcription failed: " + t->value("reason", std::string{});
    }
  } else {
    in.transcripts_reason = "media processing did not run";
  }

  if (auto stored = read_evidence(out_dir)) {
    append_unique(in.notes, stored->notes);
    if (stored->buffer.documents.empty()) {
      in.evidence_reason = "no external sources";
    } else {
      in.evidence = std::move(stored->buffer);
    }
  } else {
    in.evidence_reason = "evidence retrieval did not run";
  }

  load_step(out_dir / kCrossValidationFile, "cross-validation", in.cross_validation, in.cross_validation_reason, in);
  load_step(out_dir / kForensicFile, "forensic analysis", in.forensic, in.forensic_reason, in);
  return in;
}

VerificationReport build_report(const ReportInputs& in) {
  VerificationReport r;
  r.case_id = in.case_info.case_id;
  r.metadata = in.case_info.metadata;
  r.cross_validation = in.cross_validation;
  r.forensic = in.forensic;
  if (in.transcripts) r.transcripts = *in.transcripts;
  if (in.evidence) r.sources = in.evidence->documents;
  if (in.keyframes) r.keyframe_manifest = *in.keyframes;
  r.human_review_required = !in.review_reasons.empty();
  for (std::size_t i = 0; i < in.review_reasons.size(); ++i) {
    if (i) r.human_review_reason += "; ";
    r.human_review_reason += in.review_reasons[i];
  }
  auto mark = [&](std::string_view key, bool present, const std::string& reason) {
    if (!present) r.unavailable.emplace_back(std::string(key), reason.empty() ? "unknown" : reason);
  };
  mark(kSectionCrossValidation, in.cross_validation.has_value(), in.cross_validation_reason);
  mark(kSectionForensic, in.forensic.has_value(), in.forensic_reason);
  mark(kSectionKeyframes, in.keyframes.has_value(), in.keyframes_reason);
  mark(kSectionSources, in.evidence.has_value(), in.evidence_reason);
  mark(kSectionTranscripts, in.transcripts.has_value(), in.transcripts_reason);
  std::sort(r.unavailable.begin(), r.unavailable.end());
  r.notes = in.notes;
  return r;
}

std::string render_report_markdown(const VerificationReport& r) {
  std::ostringstream md;
  const CaseMetadata& m = r.metadata;
  md << "# Verification report: " << md_text(r.case_id) << "\n\n";
  write_field(md, "Title", m.title);
  write_field(md, "Description", m.description);
  write_field(md, "Location hint", m.location_hint);
  write_field(md, "Category", m.category);
  write_field(md, "Violence level", m.violence_level);
  if (m.media_link.empty()) {
    write_field(md, "Media link", "");
  } else {
    md << "- **Media link:** " << md_link(m.media_link, m.media_link) << "\n";
  }
  md << "\n";

  md << "## Step 1: Evidence retrieval\n\n";
  if (unavailable_reason(r, kSectionSources)) {
    write_unavailable(md, r, kSectionSources);
  } else {
    for (const SourceDocument& d : r.sources) {
      md << d.rank << ". " << md_link(d.title.empty() ? d.link : d.title, d.link) << " (date: " << md_text(d.date)
         << ")";
      if (d.rank == 0) md << " [case media link]";
      if (d.exact_match) md << " [exact phrase match]";
      if (d.fetch_failed()) md << " [" << kFetchFailedMarker << "]";
      md << "\n";
    }
    md << "\n";
  }

  md << "## Step 2: Keyframes\n\n";
  if (unavailable_reason(r, kSectionKeyframes)) {
    write_unavailable(md, r, kSectionKeyframes);
  } else {
    md << "| # | Asset | Time (s) | Shot frames | Thumbnail |\n|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < r.keyframe_manifest.size(); ++i) {
      const Keyframe& k = r.keyframe_manifest[i];
      const std::string name = keyframe_image_name(i);
      md << "| " << i << " | " << md_text(k.frame.asset_id) << " | " << fixed2(k.frame.timestamp_s) << " | "
         << k.shot.start_frame << "-" << k.shot.end_frame << " | ![" << name << "](" << name << ") |\n";
    }
    md << "\n";
  }

  md << "## Step 3: Transcripts\n\n";
  if (unavailable_reason(r, kSectionTranscripts)) {
    write_unavailable(md, r, kSectionTranscripts);
  } else {
    for (const Transcript& t : r.transcripts) {
      md << "### " << md_text(t.asset_id) << " (language: " << md_text(t.language) << ")\n\n";
      for (const TranscriptSegment& s : t.segments) {
        md << "- [" << fixed2(s.start_s) << " s to " << fixed2(s.end_s) << " s] ";
        if (s.error.empty()) md << md_text(s.text);
        else md << "(not transcribed: " << md_text(s.error) << ")";
        md << "\n";
      }
      md << "\n";
    }
  }

  md << "## Step 4: Cross-validation\n\n";
  if (unavailable_reason(r, kSectionCrossValidation)) {
    write_unavailable(md, r, kSectionCrossValidation);
  } else {
    const CrossValidation& cv = *r.cross_validation;
    write_field(md, "Location", cv.location_name);
    write_field(md, "Coordinates", cv.coordinates ? format_coordinates(*cv.coordinates) : std::string());
    std::string date = cv.date_text;
    if (cv.date_span) {
      date = format_date(cv.date_span->earliest);
      if (cv.date_span->latest != cv.date_span->earliest) date += " - " + format_date(cv.date_span->latest);
      date += " (" + std::to_string(cv.date_span->days()) + " days)";
    }
    write_field(md, "Date", date);
    write_field(md, "Consensus", to_string(cv.consensus));
    write_field(md, "Date notes", cv.notes);
    write_field(md, "Consensus about", cv.consensus_about);
    write_field(md, "Conflicts", cv.conflicts);
    std::string tags;
    for (std::size_t i = 0; i < cv.tags.size(); ++i) tags += (i ? ", " : "") + cv.tags[i];
    write_field(md, "Tags", tags);
    md << "\n";
  }

  md << "## Step 5: Forensic analysis\n\n";
  if (unavailable_reason(r, kSectionForensic)) {
    write_unavailable(md, r, kSectionForensic);
  } else {
    const ForensicAnalysis& f = *r.forensic;
    write_field(md, "Metadata validation (location)", f.metadata_validation.location);
    write_field(md, "Metadata validation (event)", f.metadata_validation.event);
    write_field(md, "Metadata validation (people)", f.metadata_validation.people);
    write_field(md, "Authenticity", f.authenticity);
    write_field(md, "Authenticity evidence", f.auth_evidence);
    write_field(md, "Synthetic type", f.synt_type);
    write_field(md, "Other", f.other);
    md << "\n";
  }

  md << "## Human review\n\n";
  if (r.human_review_required) {
    md << "Required: yes\n\n";
    md << "Reasons: " << md_text(r.human_review_reason) << "\n\n";
  } else {
    md << "Required: no\n\n";
  }

  md << "## Notes\n\n";
  if (r.notes.empty()) md << "None.\n";
  for (const auto& n : r.notes) md << "- " << md_text(n) << "\n";
  return md.str();
}

VerificationReport assemble_report(const ReportInputs& inputs, const fs::path& out_dir) {
  VerificationReport report = build_report(inputs);
  write_file(out_dir / kReportJsonFile, dump_json(report));
  write_file(out_dir / kReportMdFile, render_report_markdown(report));
  return report;
}

}  // namespace mmv
