#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmv/evidence.hpp"
#include "mmv/llm.hpp"
#include "mmv/model.hpp"

namespace mmv {

enum class TemplateId { cross_validation, forensic };

std::string_view to_string(TemplateId id);
// Bundled body, byte-identical to templates/prompt1.txt or prompt2.txt.
std::string_view template_body(TemplateId id);
std::string_view template_file_name(TemplateId id);

using Bindings = std::map<std::string, std::string, std::less<>>;

// Substitutes every {{name}}. Throws Error{MissingBinding} naming the first
// placeholder without a binding.
std::string render_prompt(TemplateId id, const Bindings& bindings);
std::string render_template(std::string_view body, const Bindings& bindings);

inline constexpr std::string_view kReaskSuffix = "\n\nReturn only valid JSON.";

// First JSON object in raw_text, checked against the template's output keys.
// Throws Error{NoJsonFound} or Error{SchemaViolation} (message lists the
// missing keys).
json parse_llm_json(std::string_view raw_text, TemplateId schema);
std::vector<std::string> missing_keys(const json& object, TemplateId schema);

// dd/mm/yyyy (day and month may be one digit). Throws Error{BadDate}.
CalendarDate parse_date(std::string_view text);
// A single date or "dd/mm/yyyy - dd/mm/yyyy"; the span is ordered.
DateSpan parse_date_span(std::string_view text);
std::string format_date(const CalendarDate& date);

// < 30 days Consensus, 30..92 Partial, > 92 Non-verifiable.
ConsensusLabel classify_consensus(const DateSpan& span);
ConsensusLabel classify_consensus_days(int span_days);

// "48.9781° N, 37.8017° E" or "48.9781, 37.8017". Throws Error{BadCoordinates}.
GeoPoint parse_coordinates(std::string_view text);
// Hemisphere notation with shortest round-trip digits.
std::string format_coordinates(const GeoPoint& point);

// Turns a parsed Prompt 1 object into a CrossValidation. The consensus label
// is always re-derived from the date span when one parses; disagreements with
// the model are written to `notes`.
CrossValidation cross_validation_from_json(const json& object, std::vector<std::string>& notes);
ForensicAnalysis forensic_from_json(const json& object);

struct VerificationOptions {
  RetryPolicy retry;
  Sleeper sleep = real_sleep;
};

template <typename T>
struct StepResult {
  std::optional<T> value;
  bool refusal = false;
  std::string failure;  // why value is absent
  std::vector<std::string> notes;
  int llm_calls = 0;
};

// Errors other than AuthError are folded into the result.
StepResult<CrossValidation> run_cross_validation(const EvidenceBuffer& buffer, LlmClient& client,
                                                 const VerificationOptions& options = {});

struct ForensicImage {
  std::string label;  // e.g. "kf_0.jpg (video1.mp4 @ 3.50 s)"
  std::string base64_jpeg;
};

// Throws Error{NoImages} for an empty image list; other errors except
// AuthError are folded into the result.
StepResult<ForensicAnalysis> run_forensic_analysis(std::span<const ForensicImage> images,
                                                   const std::optional<CrossValidation>& crossval,
                                                   const CaseMetadata& metadata,
                                                   std::span<const Transcript> transcripts, LlmClient& client,
                                                   const VerificationOptions& options = {});

// The {{metadata}} binding for Prompt 2.
std::string forensic_metadata_binding(const std::optional<CrossValidation>& crossval, const CaseMetadata& metadata,
                                      std::span<const Transcript> transcripts);

}  // namespace mmv
