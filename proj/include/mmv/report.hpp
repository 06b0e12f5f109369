#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmv/evidence.hpp"
#include "mmv/model.hpp"

namespace mmv {

// Everything the report is built from. An absent value carries the reason
// it is missing.
struct ReportInputs {
  Case case_info;
  std::optional<CrossValidation> cross_validation;
  std::string cross_validation_reason;
  std::optional<ForensicAnalysis> forensic;
  std::string forensic_reason;
  std::optional<std::vector<Transcript>> transcripts;
  std::string transcripts_reason;
  std::optional<EvidenceBuffer> evidence;
  std::string evidence_reason;
  std::optional<std::vector<Keyframe>> keyframes;
  std::string keyframes_reason;
  std::vector<std::string> review_reasons;
  std::vector<std::string> notes;
};

// Section keys used in VerificationReport::unavailable.
inline constexpr std::string_view kSectionSources = "sources";
inline constexpr std::string_view kSectionKeyframes = "keyframes";
inline constexpr std::string_view kSectionTranscripts = "transcripts";
inline constexpr std::string_view kSectionCrossValidation = "cross_validation";
inline constexpr std::string_view kSectionForensic = "forensic";

// Reads the stage files in out_dir. Missing files become "did not run" reasons.
ReportInputs load_report_inputs(const Case& c, const std::filesystem::path& out_dir);

VerificationReport build_report(const ReportInputs& inputs);

// Steps 1 to 5 plus review status and notes. Keyframe thumbnails link to
// kf_<n>.jpg relative to the report.
std::string render_report_markdown(const VerificationReport& report);

// build_report, then report.json and report.md in out_dir.
// Throws Error{PersistFailure}.
VerificationReport assemble_report(const ReportInputs& inputs, const std::filesystem::path& out_dir);

}  // namespace mmv
